#include "hamnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "hamnet/errors.hpp"

namespace hamnet {

using detail::Node;
using detail::NodePtr;

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

void Node::accumulate(std::size_t i, double g) {
  if (!requires_grad) return;
  grad_buffer()[i] += g;
}

}  // namespace detail

namespace {

NodePtr new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.size() > 2) throw ShapeError("tensors are limited to rank 2, got " + shape_str(shape));
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

void require_rank1(const Tensor& a, const char* op) {
  if (a.rank() != 1) throw ShapeError(std::string(op) + ": expected a vector, got " + shape_str(a.shape()));
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  auto an = a.node();
  auto out_copy = out;
  return make_op(op, a.shape(), std::move(out), {a},
                 [an, out_copy = std::move(out_copy), deriv](std::span<const double> g) {
                   for (std::size_t i = 0; i < g.size(); ++i)
                     an->accumulate(i, g[i] * deriv(an->value[i], out_copy[i]));
                 });
}

}  // namespace

// ---- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor(new_leaf({n, n}, std::move(v), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw Error("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  return s.back();
}

std::span<const double> Tensor::values() const {
  if (!node_) throw Error("use of an undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw Error("use of an undefined tensor");
  if (!node_->parents.empty() || node_->backward) throw Error("only leaf tensors are writable");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() == 1) return values()[c];
  return values()[r * cols() + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw Error("use of an undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (numel() != 1) throw ShapeError("backward() requires a single-element result");
  ComputationTape::record(*this).backward();
}

Tensor Tensor::detach() const {
  return Tensor(new_leaf(shape(), node_->value, false));
}

bool Tensor::all_finite() const {
  return std::all_of(values().begin(), values().end(), [](double v) { return std::isfinite(v); });
}

// ---- ComputationTape ---------------------------------------------------------

ComputationTape ComputationTape::record(const Tensor& root) {
  ComputationTape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<const Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void ComputationTape::backward() const {
  if (nodes_.empty()) return;
  nodes_.back()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n.grad);
  }
}

Tensor make_op(const char* op, Shape shape, std::vector<double> values,
               std::vector<Tensor> parents, detail::BackwardFn backward) {
  auto n = new_leaf(std::move(shape), std::move(values), false);
  n->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) n->parents.push_back(p.node());
  }
  if (!n->parents.empty()) {
    n->requires_grad = true;
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

// ---- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto an = a.node(), bn = b.node();
  return make_op("add", a.shape(), std::move(out), {a, b}, [an, bn](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      an->accumulate(i, g[i]);
      bn->accumulate(i, g[i]);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto an = a.node(), bn = b.node();
  return make_op("sub", a.shape(), std::move(out), {a, b}, [an, bn](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      an->accumulate(i, g[i]);
      bn->accumulate(i, -g[i]);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto an = a.node(), bn = b.node();
  return make_op("mul", a.shape(), std::move(out), {a, b}, [an, bn](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      an->accumulate(i, g[i] * bn->value[i]);
      bn->accumulate(i, g[i] * an->value[i]);
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  auto an = a.node();
  return make_op("scale", a.shape(), std::move(out), {a}, [an, s](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) an->accumulate(i, g[i] * s);
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("scale_by: factor must have one element, got " + shape_str(s.shape()));
  const double f = s.item();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
  auto xn = x.node(), sn = s.node();
  return make_op("scale_by", x.shape(), std::move(out), {x, s}, [xn, sn, f](std::span<const double> g) {
    double gs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      xn->accumulate(i, g[i] * f);
      gs += g[i] * xn->value[i];
    }
    sn->accumulate(0, gs);
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  require_rank1(b, "add_row_bias");
  if (x.cols() != b.numel()) {
    throw ShapeError("add_row_bias: " + shape_str(x.shape()) + " vs bias " + shape_str(b.shape()));
  }
  const std::size_t n = b.numel();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + b[i % n];
  auto xn = x.node(), bn = b.node();
  return make_op("add_row_bias", x.shape(), std::move(out), {x, b}, [xn, bn, n](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      xn->accumulate(i, g[i]);
      bn->accumulate(i % n, g[i]);
    }
  });
}

Tensor one_minus(const Tensor& a) {
  return unary("one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a,
               [](double x) {
                 if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor activate(const Tensor& a, Activation act) {
  switch (act) {
    case Activation::ReLU: return relu(a);
    case Activation::Tanh: return tanh(a);
    case Activation::Sigmoid: return sigmoid(a);
    case Activation::Identity: return a;
  }
  return a;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  auto an = a.node(), bn = b.node();
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](std::span<const double> g) {
    if (an->requires_grad) {
      auto ga = an->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bn->value[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (bn->requires_grad) {
      auto gb = bn->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = an->value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
      out[i * n + j] = s;
    }
  auto an = a.node(), bn = b.node();
  return make_op("matmul_nt", {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](std::span<const double> g) {
    if (an->requires_grad) {
      auto ga = an->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bn->value[j * k + p];
        }
    }
    if (bn->requires_grad) {
      auto gb = bn->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * an->value[i * k + p];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  auto an = a.node();
  return make_op("transpose", {n, m}, std::move(out), {a}, [an, m, n](std::span<const double> g) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) an->accumulate(i * n + j, g[j * m + i]);
  });
}

// ---- reshaping ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  auto an = a.node();
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op("reshape", std::move(shape), std::move(out), {a}, [an](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) an->accumulate(i, g[i]);
  });
}

Tensor as_row(const Tensor& v) {
  require_rank1(v, "as_row");
  return reshape(v, {1, v.numel()});
}

Tensor flatten(const Tensor& a) { return reshape(a, {a.numel()}); }

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  return make_op("concat_rows", {m, n}, std::move(out), parts, [nodes](std::span<const double> g) {
    std::size_t off = 0;
    for (const auto& node : nodes) {
      for (std::size_t i = 0; i < node->value.size(); ++i) node->accumulate(i, g[off + i]);
      off += node->value.size();
    }
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() == 1 && b.rank() == 1) return flatten(concat_cols(as_row(a), as_row(b)));
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), na = a.cols(), nb = b.cols(), n = na + nb;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out[i * n + j] = a[i * na + j];
    for (std::size_t j = 0; j < nb; ++j) out[i * n + na + j] = b[i * nb + j];
  }
  auto an = a.node(), bn = b.node();
  return make_op("concat_cols", {m, n}, std::move(out), {a, b}, [an, bn, m, na, nb, n](std::span<const double> g) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < na; ++j) an->accumulate(i * na + j, g[i * n + j]);
      for (std::size_t j = 0; j < nb; ++j) bn->accumulate(i * nb + j, g[i * n + na + j]);
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_str(a.shape()));
  }
  const std::size_t n = a.cols();
  std::vector<double> out(a.values().begin() + begin * n, a.values().begin() + end * n);
  auto an = a.node();
  return make_op("slice_rows", {end - begin, n}, std::move(out), {a}, [an, begin, n](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) an->accumulate(begin * n + i, g[i]);
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_str(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a[i * n + begin + j];
  auto an = a.node();
  return make_op("slice_cols", {m, w}, std::move(out), {a}, [an, begin, m, n, w](std::span<const double> g) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) an->accumulate(i * n + begin + j, g[i * w + j]);
  });
}

Tensor row(const Tensor& a, std::size_t r) { return flatten(slice_rows(a, r, r + 1)); }

Tensor repeat_rows(const Tensor& v, std::size_t n) {
  require_rank1(v, "repeat_rows");
  const std::size_t d = v.numel();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy(v.values().begin(), v.values().end(), out.begin() + i * d);
  auto vn = v.node();
  return make_op("repeat_rows", {n, d}, std::move(out), {v}, [vn, d](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) vn->accumulate(i % d, g[i]);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t n = table.cols();
  std::vector<double> out(ids.size() * n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " out of range for " +
                       shape_str(table.shape()));
    }
    std::copy_n(table.values().begin() + ids[i] * n, n, out.begin() + i * n);
  }
  auto tn = table.node();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_op("gather_rows", {ids.size(), n}, std::move(out), {table}, [tn, idx, n](std::span<const double> g) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) tn->accumulate(idx[i] * n + j, g[i * n + j]);
  });
}

// ---- reductions & normalizers ------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto an = a.node();
  return make_op("sum", {1}, {s}, {a}, [an](std::span<const double> g) {
    for (std::size_t i = 0; i < an->value.size(); ++i) an->accumulate(i, g[0]);
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor softmax(const Tensor& v) {
  require_rank1(v, "softmax");
  if (v.numel() == 0) throw Error("empty distribution");
  return flatten(softmax_rows(as_row(v)));
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw Error("empty distribution");
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.values().data() + i * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  auto xn = x.node();
  auto probs = out;
  return make_op("softmax_rows", {m, n}, std::move(out), {x},
                 [xn, probs = std::move(probs), m, n](std::span<const double> g) {
                   for (std::size_t i = 0; i < m; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * probs[i * n + j];
                     for (std::size_t j = 0; j < n; ++j)
                       xn->accumulate(i * n + j, probs[i * n + j] * (g[i * n + j] - dot));
                   }
                 });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank2(x, "layer_norm_rows");
  require_rank1(gamma, "layer_norm_rows");
  require_rank1(beta, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.numel() != n || beta.numel() != n) throw ShapeError("layer_norm_rows: affine size mismatch");
  std::vector<double> xhat(m * n), inv_std(m), out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.values().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (in[j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gamma[j] + beta[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op("layer_norm_rows", {m, n}, std::move(out), {x, gamma, beta},
                 [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), m, n](std::span<const double> g) {
                   const double nn = static_cast<double>(n);
                   for (std::size_t i = 0; i < m; ++i) {
                     double sum_dy = 0.0, sum_dy_xhat = 0.0;
                     for (std::size_t j = 0; j < n; ++j) {
                       const double gj = g[i * n + j];
                       gn->accumulate(j, gj * xhat[i * n + j]);
                       bn->accumulate(j, gj);
                       const double dy = gj * gn->value[j];
                       sum_dy += dy;
                       sum_dy_xhat += dy * xhat[i * n + j];
                     }
                     if (!xn->requires_grad) continue;
                     for (std::size_t j = 0; j < n; ++j) {
                       const double dy = g[i * n + j] * gn->value[j];
                       xn->accumulate(i * n + j,
                                      inv_std[i] / nn * (nn * dy - sum_dy - xhat[i * n + j] * sum_dy_xhat));
                     }
                   }
                 });
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace hamnet
