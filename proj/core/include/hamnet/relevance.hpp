#pragma once

// Text-image relevance per vision view and local-global fusion:
//   C = tanh(h_cls^T W_TI v_img)            (scalar)
//   M = tanh(W_T h_cls + W_I v_img * C)     (vector, or scalar variant)
//   V_i = Linear([M ⊙ v_img ; v_i])          (2d -> d)

#include "hamnet/nn.hpp"

namespace hamnet {

enum class RelevanceVariant { Vector, Scalar };

struct RelevanceParams {
  Tensor bilinear;      // W_TI [d×d]
  Linear text_proj;     // W_T, no bias; out = d (vector) or 1 (scalar)
  Linear image_proj;    // W_I, no bias
  Linear fuse;          // [M⊙v_img ; v_i] -> d
  RelevanceVariant variant = RelevanceVariant::Vector;

  static RelevanceParams make(std::size_t d, RelevanceVariant variant, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct RelevanceOutput {
  Tensor relevance;  // M [d], entries in (-1, 1)
  Tensor fused;      // V [N×d]
};

/// Returns M as a length-d vector (the scalar variant is broadcast).
Tensor relevance_score(const Tensor& h_cls, const Tensor& v_img, const RelevanceParams& params);
Tensor fuse_local_global(const Tensor& relevance, const Tensor& v_img, const Tensor& objects,
                         const RelevanceParams& params);
RelevanceOutput measure_relevance(const Tensor& h_cls, const Tensor& v_img, const Tensor& objects,
                                  const RelevanceParams& params, const ForwardContext& ctx = {});

}  // namespace hamnet
