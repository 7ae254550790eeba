#include "hamnet/relevance.hpp"

#include "hamnet/errors.hpp"

namespace hamnet {

RelevanceParams RelevanceParams::make(std::size_t d, RelevanceVariant variant, Initializer& init) {
  RelevanceParams p;
  const std::size_t m_width = variant == RelevanceVariant::Vector ? d : 1;
  p.bilinear = init.matrix(d, d);
  p.text_proj = Linear::make(d, m_width, init, false);
  p.image_proj = Linear::make(d, m_width, init, false);
  p.fuse = Linear::make(2 * d, d, init);
  p.variant = variant;
  return p;
}

void RelevanceParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".bilinear", bilinear});
  text_proj.collect(prefix + ".text_proj", out);
  image_proj.collect(prefix + ".image_proj", out);
  fuse.collect(prefix + ".fuse", out);
}

Tensor relevance_score(const Tensor& h_cls, const Tensor& v_img, const RelevanceParams& params) {
  const std::size_t d = params.bilinear.rows();
  if (h_cls.rank() != 1 || v_img.rank() != 1 || h_cls.numel() != d || v_img.numel() != d) {
    throw ShapeError("relevance_score: expected two vectors of width " + std::to_string(d) + ", got " +
                     shape_str(h_cls.shape()) + " and " + shape_str(v_img.shape()));
  }
  Tensor c = tanh(matmul_nt(matmul(as_row(h_cls), params.bilinear), as_row(v_img)));  // [1×1]
  Tensor m = tanh(add(params.text_proj(h_cls), scale_by(params.image_proj(v_img), c)));
  if (params.variant == RelevanceVariant::Scalar) return scale_by(Tensor::filled({d}, 1.0), m);
  return m;
}

Tensor fuse_local_global(const Tensor& relevance, const Tensor& v_img, const Tensor& objects,
                         const RelevanceParams& params) {
  const std::size_t d = v_img.numel();
  if (relevance.shape() != v_img.shape() || objects.rank() != 2 || objects.cols() != d) {
    throw ShapeError("fuse_local_global: relevance " + shape_str(relevance.shape()) + ", image " +
                     shape_str(v_img.shape()) + ", objects " + shape_str(objects.shape()));
  }
  if (objects.rows() == 0) return Tensor::zeros({0, params.fuse.out_features()});
  Tensor global = repeat_rows(mul(relevance, v_img), objects.rows());
  return params.fuse(concat_cols(global, objects));
}

RelevanceOutput measure_relevance(const Tensor& h_cls, const Tensor& v_img, const Tensor& objects,
                                  const RelevanceParams& params, const ForwardContext& ctx) {
  Tensor m = relevance_score(h_cls, v_img, params);
  if (ctx.trace) ctx.trace->relevance.push_back(m.detach());
  return RelevanceOutput{m, fuse_local_global(m, v_img, objects, params)};
}

}  // namespace hamnet
