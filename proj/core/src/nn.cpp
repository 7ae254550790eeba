#include "hamnet/nn.hpp"

#include <cmath>

#include "hamnet/errors.hpp"

namespace hamnet {

Tensor ForwardContext::maybe_dropout(const Tensor& x) const {
  if (!training || dropout <= 0.0 || rng == nullptr) return x;
  return hamnet::dropout(x, dropout, *rng);
}

Tensor Initializer::matrix(std::size_t rows, std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng_);
  return Tensor::from({rows, cols}, std::move(v), true);
}

Tensor Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng_);
  return Tensor::from(std::move(shape), std::move(v), true);
}

void check_heads(std::size_t d, std::size_t heads) {
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " must divide model width " + std::to_string(d));
  }
}

// ---- Linear ------------------------------------------------------------------

Linear Linear::make(std::size_t in, std::size_t out, Initializer& init, bool with_bias) {
  Linear l;
  l.weight = init.matrix(out, in);
  if (with_bias) l.bias = init.zeros({out});
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() == 1) return flatten((*this)(as_row(x)));
  if (x.cols() != in_features()) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  Tensor y = matmul_nt(x, weight);
  return bias.defined() ? add_row_bias(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::make(std::size_t d, Initializer& init) {
  return LayerNorm{init.ones({d}), init.zeros({d})};
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

// ---- attention ---------------------------------------------------------------

MultiHeadAttention MultiHeadAttention::make(std::size_t d, std::size_t heads, Initializer& init) {
  check_heads(d, heads);
  MultiHeadAttention m;
  m.query = Linear::make(d, d, init);
  m.key = Linear::make(d, d, init);
  m.value = Linear::make(d, d, init);
  m.output = Linear::make(d, d, init);
  m.heads = heads;
  return m;
}

Tensor MultiHeadAttention::operator()(const Tensor& q, const Tensor& k, const Tensor& v,
                                      const ForwardContext& ctx) const {
  const std::size_t d = query.in_features();
  check_heads(d, heads);
  if (q.cols() != d || k.cols() != d || v.cols() != d) {
    throw ShapeError("attention: width mismatch, expected " + std::to_string(d));
  }
  if (k.rows() != v.rows()) throw ShapeError("attention: keys and values differ in length");
  if (k.rows() == 0) throw ShapeError("attention: no keys");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor qp = query(q), kp = key(k), vp = value(v);
  Tensor mixed;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor scores = scale(matmul_nt(slice_cols(qp, h * dh, (h + 1) * dh), slice_cols(kp, h * dh, (h + 1) * dh)),
                          inv_sqrt);
    Tensor probs = softmax_rows(scores);
    if (ctx.trace) ctx.trace->attention.push_back(probs.detach());
    Tensor head = matmul(ctx.maybe_dropout(probs), slice_cols(vp, h * dh, (h + 1) * dh));
    mixed = mixed.defined() ? concat_cols(mixed, head) : head;
  }
  return output(mixed);
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

FeedForward FeedForward::make(std::size_t d, std::size_t hidden, Initializer& init) {
  return FeedForward{Linear::make(d, hidden, init), Linear::make(hidden, d, init), Activation::ReLU};
}

void FeedForward::collect(const std::string& prefix, ParamList& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

// ---- Transformer -------------------------------------------------------------

TransformerBlock TransformerBlock::make(std::size_t d, std::size_t heads, bool cross, Initializer& init) {
  TransformerBlock b;
  b.norm_attn = LayerNorm::make(d, init);
  if (cross) b.norm_kv = LayerNorm::make(d, init);
  b.norm_ffn = LayerNorm::make(d, init);
  b.attn = MultiHeadAttention::make(d, heads, init);
  b.ffn = FeedForward::make(d, 4 * d, init);
  b.cross = cross;
  return b;
}

Tensor TransformerBlock::feed_forward(const Tensor& x, const ForwardContext& ctx) const {
  return add(x, ctx.maybe_dropout(ffn(norm_ffn(x))));
}

Tensor TransformerBlock::self_attend(const Tensor& x, const ForwardContext& ctx) const {
  if (x.rows() == 0) return x;
  Tensor n = norm_attn(x);
  Tensor h = add(x, ctx.maybe_dropout(attn(n, n, n, ctx)));
  return feed_forward(h, ctx);
}

Tensor TransformerBlock::cross_attend(const Tensor& q, const Tensor& kv, const ForwardContext& ctx) const {
  if (!cross) throw ConfigError("cross_attend on a self-attention block");
  if (q.rows() == 0) return q;
  if (kv.rows() == 0) return feed_forward(q, ctx);
  Tensor nkv = norm_kv(kv);
  Tensor h = add(q, ctx.maybe_dropout(attn(norm_attn(q), nkv, nkv, ctx)));
  return feed_forward(h, ctx);
}

void TransformerBlock::collect(const std::string& prefix, ParamList& out) const {
  norm_attn.collect(prefix + ".norm_attn", out);
  if (cross) norm_kv.collect(prefix + ".norm_kv", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
  attn.collect(prefix + ".attn", out);
  ffn.collect(prefix + ".ffn", out);
}

TransformerEncoder TransformerEncoder::make(std::size_t d, std::size_t heads, std::size_t depth,
                                            std::size_t max_positions, Initializer& init) {
  TransformerEncoder e;
  for (std::size_t i = 0; i < depth; ++i) e.layers.push_back(TransformerBlock::make(d, heads, false, init));
  if (max_positions > 0) e.positions = init.normal({max_positions, d}, 0.02);
  return e;
}

Tensor TransformerEncoder::operator()(const Tensor& x, const ForwardContext& ctx) const {
  Tensor h = x;
  if (positions.defined()) {
    if (x.rows() > positions.rows()) {
      throw ShapeError("sequence of " + std::to_string(x.rows()) + " exceeds " +
                       std::to_string(positions.rows()) + " positions");
    }
    h = add(h, slice_rows(positions, 0, x.rows()));
  }
  for (const auto& layer : layers) h = layer.self_attend(h, ctx);
  return h;
}

void TransformerEncoder::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  if (positions.defined()) out.push_back({prefix + ".positions", positions});
}

}  // namespace hamnet
