#pragma once

// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto an immutable graph node. Operations build
// new nodes that remember their parents and a backward closure; calling
// backward() on a scalar result records a ComputationTape (topological order
// of the reachable graph) and replays it in reverse. Only rank-1 and rank-2
// tensors are supported; there is no broadcasting apart from add_row_bias.

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hamnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Receives the gradient of the node's output and accumulates into parents.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;
  const char* op = "leaf";

  void accumulate(std::size_t i, double g);
  std::span<double> grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Rank-2 row/column counts; a rank-1 tensor reports rows()==1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Writable access for leaves only (parameters updated by optimizers).
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Reverse pass from a single-element tensor; gradients accumulate into
  // every reachable node that requires them.
  void backward() const;

  // Same values, no history.
  Tensor detach() const;
  bool all_finite() const;

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Ordered record of the differentiable operations reachable from a root.
/// Every node appears after all of its parents.
class ComputationTape {
 public:
  static ComputationTape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  std::span<const detail::NodePtr> nodes() const { return nodes_; }
  // Seeds d(root)/d(root)=1 and visits each node once in reverse order.
  void backward() const;

 private:
  std::vector<detail::NodePtr> nodes_;
};

// Builds a result node. Parents that do not require gradients are dropped
// from the history; if none remain the result is a constant.
Tensor make_op(const char* op, Shape shape, std::vector<double> values,
               std::vector<Tensor> parents, detail::BackwardFn backward);

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Multiplies every element of x by the single element of s.
Tensor scale_by(const Tensor& x, const Tensor& s);
// x[m×n] + b[n] added to every row.
Tensor add_row_bias(const Tensor& x, const Tensor& b);
Tensor one_minus(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

enum class Activation { ReLU, Tanh, Sigmoid, Identity };
Tensor activate(const Tensor& a, Activation act);
Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

// ---- linear algebra ----------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);     // [m×k]·[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m×k]·[n×k]ᵀ
Tensor transpose(const Tensor& a);

// ---- reshaping ---------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
Tensor as_row(const Tensor& v);  // [n] -> [1×n]
Tensor flatten(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor row(const Tensor& a, std::size_t r);  // rank-1 result
Tensor repeat_rows(const Tensor& v, std::size_t n);  // [d] -> [n×d]
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

// ---- reductions & normalizers ------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Stable softmax of a rank-1 tensor. Throws Error("empty distribution").
Tensor softmax(const Tensor& v);
Tensor softmax_rows(const Tensor& x);
inline constexpr double kLayerNormEps = 1e-9;
// Per-row normalization to zero mean / unit variance followed by gamma, beta.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = kLayerNormEps);

// Inverted dropout with keep probability 1-p; identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace hamnet
