#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "hamnet/nn.hpp"

namespace hamnet {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per group; groups smaller than this are checked fully.
  std::size_t samples_per_group = 64;
  std::uint64_t seed = 0;
  // Maps a parameter name to its group. Default: one group per parameter.
  std::function<std::string(const std::string&)> group_of;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  std::map<std::string, double> per_group;  // max relative error per group
};

/// Group key = text before the first '.', i.e. the pipeline stage.
std::string stage_of(const std::string& param_name);

/// Compares reverse-mode gradients of a scalar program against central
/// differences. Relative error per coordinate is
///   |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Leaves parameter values untouched on return and their gradients cleared.
/// Throws NumericalError naming the parameter block when an evaluation is
/// not finite.
GradCheckResult check_gradients(const std::function<Tensor()>& program, const ParamList& params,
                                const GradCheckOptions& options = {});

}  // namespace hamnet
