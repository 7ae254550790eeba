#include "hamnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hamnet/errors.hpp"

namespace hamnet {

std::string stage_of(const std::string& param_name) {
  return param_name.substr(0, param_name.find('.'));
}

namespace {

double evaluate(const std::function<Tensor()>& program, const std::string& block) {
  const double v = program().item();
  if (!std::isfinite(v)) throw NumericalError("non-finite evaluation while perturbing '" + block + "'");
  return v;
}

}  // namespace

GradCheckResult check_gradients(const std::function<Tensor()>& program, const ParamList& params,
                                const GradCheckOptions& options) {
  ParamList ps = params;
  for (auto& p : ps) p.tensor.zero_grad();
  Tensor out = program();
  if (!std::isfinite(out.item())) throw NumericalError("non-finite evaluation at the unperturbed point");
  out.backward();

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::map<std::string, std::vector<Coord>> groups;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    const std::string key = options.group_of ? options.group_of(ps[p].name) : ps[p].name;
    auto& g = groups[key];
    for (std::size_t i = 0; i < ps[p].tensor.numel(); ++i) g.push_back({p, i});
  }

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (auto& [key, coords] : groups) {
    if (coords.size() > options.samples_per_group) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_group);
    }
    double group_max = 0.0;
    for (const auto& c : coords) {
      Tensor& t = ps[c.param].tensor;
      const double analytic = t.has_grad() ? t.grad()[c.index] : 0.0;
      auto vals = t.mutable_values();
      const double orig = vals[c.index];
      vals[c.index] = orig + options.epsilon;
      const double up = evaluate(program, ps[c.param].name);
      vals[c.index] = orig - options.epsilon;
      const double down = evaluate(program, ps[c.param].name);
      vals[c.index] = orig;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      const double err = std::abs(analytic - numeric) / denom;
      group_max = std::max(group_max, err);
      if (err > result.max_rel_error || result.coordinates == 0) {
        result.max_rel_error = err;
        result.worst_param = ps[c.param].name;
        result.worst_index = c.index;
      }
      ++result.coordinates;
    }
    result.per_group[key] = group_max;
  }
  for (auto& p : ps) p.tensor.zero_grad();
  return result;
}

}  // namespace hamnet
