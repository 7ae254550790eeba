#pragma once

// Neural building blocks shared by every encoder: linear maps, layer norm,
// multi-head attention and pre-norm Transformer blocks.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hamnet/tensor.hpp"

namespace hamnet {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Observed intermediate values, filled only when a trace is attached to the
/// forward context. Every entry is detached.
struct ForwardTrace {
  std::vector<Tensor> attention;   // one [queries×keys] matrix per head call
  std::vector<Tensor> rgcn_gates;  // λ per R-GCN layer
  std::vector<Tensor> view_gates;  // α per fuse_views call
  std::vector<Tensor> relevance;   // M^r per view
};

struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
  ForwardTrace* trace = nullptr;

  Tensor maybe_dropout(const Tensor& x) const;
};

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  // Glorot-uniform [rows×cols].
  Tensor matrix(std::size_t rows, std::size_t cols);
  Tensor normal(Shape shape, double stddev);
  Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }
  Tensor ones(Shape shape) { return Tensor::filled(std::move(shape), 1.0, true); }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// y = x·Wᵀ + b with W stored as [out×in]. Accepts a vector or a row matrix.
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the map has no bias

  static Linear make(std::size_t in, std::size_t out, Initializer& init, bool with_bias = true);
  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm make(std::size_t d, Initializer& init);
  Tensor operator()(const Tensor& x) const { return layer_norm_rows(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttention make(std::size_t d, std::size_t heads, Initializer& init);
  // q[m×d] attends over k[n×d], v[n×d]; returns the projected [m×d] mix
  // (no residual). n must be at least 1.
  Tensor operator()(const Tensor& q, const Tensor& k, const Tensor& v, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct FeedForward {
  Linear hidden, output;
  Activation act = Activation::ReLU;

  static FeedForward make(std::size_t d, std::size_t hidden, Initializer& init);
  Tensor operator()(const Tensor& x) const { return output(activate(hidden(x), act)); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Pre-norm Transformer layer:
///   x = q + MHA(LN(q), LN_kv(kv));  y = x + FFN(LN(x))
/// Self-attention uses the query norm for keys too. With every weight zero
/// the block is the identity map.
struct TransformerBlock {
  LayerNorm norm_attn, norm_kv, norm_ffn;
  MultiHeadAttention attn;
  FeedForward ffn;
  bool cross = false;

  static TransformerBlock make(std::size_t d, std::size_t heads, bool cross, Initializer& init);
  Tensor self_attend(const Tensor& x, const ForwardContext& ctx) const;
  // Cross-attention from q to kv; kv with zero rows skips the attention
  // sublayer and applies only the feed-forward branch.
  Tensor cross_attend(const Tensor& q, const Tensor& kv, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor feed_forward(const Tensor& x, const ForwardContext& ctx) const;
};

/// Stack of self-attention blocks with optional learned positions.
struct TransformerEncoder {
  std::vector<TransformerBlock> layers;
  Tensor positions;  // [max_len×d]; undefined when disabled

  static TransformerEncoder make(std::size_t d, std::size_t heads, std::size_t depth,
                                 std::size_t max_positions, Initializer& init);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

void check_heads(std::size_t d, std::size_t heads);

}  // namespace hamnet
