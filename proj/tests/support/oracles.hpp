#pragma once

// Independent reference implementations used as test oracles. Everything
// here works on plain std::vector<double> with explicit loops and reads
// parameters straight out of the library structs; none of it touches the
// autodiff graph or library math helpers.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "hamnet/cross_modal.hpp"
#include "hamnet/nn.hpp"
#include "hamnet/spatial_graph.hpp"

namespace oracle {

struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), a(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * c + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * c + j]; }
};

// Rank-1 tensors become a single row.
inline Mat of(const hamnet::Tensor& t) {
  Mat m(t.rank() == 1 ? 1 : t.rows(), t.rank() == 1 ? t.numel() : t.cols());
  for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] = t.values()[i];
  return m;
}

inline Mat add(const Mat& x, const Mat& y) {
  Mat out = x;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += y.a[i];
  return out;
}

// y_i = W x_i + b, W stored [out×in].
inline Mat linear(const Mat& x, const hamnet::Linear& lin) {
  const auto W = lin.weight.values();
  const std::size_t out_f = lin.weight.rows(), in_f = lin.weight.cols();
  Mat y(x.r, out_f);
  for (std::size_t i = 0; i < x.r; ++i)
    for (std::size_t o = 0; o < out_f; ++o) {
      double s = lin.bias.defined() ? lin.bias.values()[o] : 0.0;
      for (std::size_t k = 0; k < in_f; ++k) s += W[o * in_f + k] * x(i, k);
      y(i, o) = s;
    }
  return y;
}

inline Mat map(const Mat& x, const std::function<double(double)>& f) {
  Mat y = x;
  for (double& v : y.a) v = f(v);
  return y;
}

inline double relu(double v) { return v > 0 ? v : 0.0; }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Mat layer_norm(const Mat& x, const hamnet::LayerNorm& ln, double eps = 1e-9) {
  Mat y(x.r, x.c);
  for (std::size_t i = 0; i < x.r; ++i) {
    double mu = 0;
    for (std::size_t j = 0; j < x.c; ++j) mu += x(i, j);
    mu /= static_cast<double>(x.c);
    double var = 0;
    for (std::size_t j = 0; j < x.c; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(x.c);
    for (std::size_t j = 0; j < x.c; ++j)
      y(i, j) = (x(i, j) - mu) / std::sqrt(var + eps) * ln.gamma.values()[j] + ln.beta.values()[j];
  }
  return y;
}

// Scaled dot-product attention, head by head, O(m·n·d) loops. Optionally
// records each head's probability matrix.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v, const hamnet::MultiHeadAttention& mha,
                     std::vector<Mat>* probs_out = nullptr) {
  const Mat Q = linear(q, mha.query), K = linear(k, mha.key), V = linear(v, mha.value);
  const std::size_t d = Q.c, dh = d / mha.heads;
  Mat mixed(q.r, d);
  for (std::size_t h = 0; h < mha.heads; ++h) {
    Mat probs(q.r, k.r);
    for (std::size_t i = 0; i < q.r; ++i) {
      std::vector<double> s(k.r);
      for (std::size_t j = 0; j < k.r; ++j) {
        double dot = 0;
        for (std::size_t t = 0; t < dh; ++t) dot += Q(i, h * dh + t) * K(j, h * dh + t);
        s[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      double z = 0;
      for (std::size_t j = 0; j < k.r; ++j) z += std::exp(s[j]);
      for (std::size_t j = 0; j < k.r; ++j) probs(i, j) = std::exp(s[j]) / z;
      for (std::size_t t = 0; t < dh; ++t) {
        double acc = 0;
        for (std::size_t j = 0; j < k.r; ++j) acc += probs(i, j) * V(j, h * dh + t);
        mixed(i, h * dh + t) = acc;
      }
    }
    if (probs_out) probs_out->push_back(probs);
  }
  return linear(mixed, mha.output);
}

inline Mat feed_forward(const Mat& x, const hamnet::FeedForward& ffn) {
  return linear(map(linear(x, ffn.hidden), relu), ffn.output);
}

inline Mat block_self(const Mat& x, const hamnet::TransformerBlock& b) {
  const Mat n = layer_norm(x, b.norm_attn);
  const Mat h = add(x, attention(n, n, n, b.attn));
  return add(h, feed_forward(layer_norm(h, b.norm_ffn), b.ffn));
}

inline Mat block_cross(const Mat& q, const Mat& kv, const hamnet::TransformerBlock& b) {
  if (q.r == 0) return q;
  Mat h = q;
  if (kv.r > 0) {
    const Mat nkv = layer_norm(kv, b.norm_kv);
    h = add(q, attention(layer_norm(q, b.norm_attn), nkv, nkv, b.attn));
  }
  return add(h, feed_forward(layer_norm(h, b.norm_ffn), b.ffn));
}

inline Mat encoder(Mat x, const hamnet::TransformerEncoder& enc) {
  if (enc.positions.defined())
    for (std::size_t i = 0; i < x.r; ++i)
      for (std::size_t j = 0; j < x.c; ++j) x(i, j) += enc.positions.values()[i * x.c + j];
  for (const auto& layer : enc.layers) x = block_self(x, layer);
  return x;
}

inline Mat stack(const Mat& top, const Mat& rest) {
  Mat out(top.r + rest.r, top.c);
  std::copy(top.a.begin(), top.a.end(), out.a.begin());
  std::copy(rest.a.begin(), rest.a.end(), out.a.begin() + static_cast<std::ptrdiff_t>(top.a.size()));
  return out;
}

inline Mat rows(const Mat& x, std::size_t begin, std::size_t end) {
  Mat out(end - begin, x.c);
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < x.c; ++j) out(i - begin, j) = x(i, j);
  return out;
}

// Sigmoid view gate: alpha = sigmoid(W_V tanh(W_V1 V1 + W_V2 V2)).
inline Mat fuse_views(const Mat& v1, const Mat& v2, const hamnet::ViewGateParams& g, Mat* alpha_out = nullptr) {
  if (v1.r == 0) return v1;
  const Mat inner = map(add(linear(v1, g.view1), linear(v2, g.view2)), [](double v) { return std::tanh(v); });
  const Mat alpha = map(linear(inner, g.outer), sigmoid);
  Mat out(v1.r, v1.c);
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] = alpha.a[i] * v1.a[i] + (1.0 - alpha.a[i]) * v2.a[i];
  if (alpha_out) *alpha_out = alpha;
  return out;
}

// Synchronous interaction holding explicit copies of the iteration-t state;
// all three parts read only `prev`.
struct State {
  Mat text, view1, view2;
};

inline State interact(const State& initial, const hamnet::CrossModalParams& p, std::size_t rounds) {
  State prev = initial;
  for (std::size_t t = 0; t < rounds; ++t) {
    const auto& round = p.rounds[t];
    const State frozen = prev;  // the committed state every part reads
    State next;
    next.view2 = block_cross(frozen.view2, frozen.text, round.view2);
    next.view1 = block_cross(frozen.view1, frozen.text, round.view1);
    next.text = block_cross(frozen.text, fuse_views(frozen.view1, frozen.view2, round.gate), round.text);
    prev = next;
  }
  return prev;
}

// ---- CRF by enumeration ----------------------------------------------------

struct CrfInstance {
  std::size_t m = 0, k = 0;
  std::vector<double> emissions;    // [m×k]
  std::vector<double> transitions;  // [k×k] from,to
  std::vector<double> start, stop;  // [k]
};

inline double path_score(const CrfInstance& c, const std::vector<std::size_t>& y) {
  double s = c.start[y[0]] + c.stop[y[c.m - 1]];
  for (std::size_t i = 0; i < c.m; ++i) s += c.emissions[i * c.k + y[i]];
  for (std::size_t i = 0; i + 1 < c.m; ++i) s += c.transitions[y[i] * c.k + y[i + 1]];
  return s;
}

// Visits all k^m sequences in lexicographic order.
inline void enumerate(const CrfInstance& c, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> y(c.m, 0);
  while (true) {
    visit(y);
    std::size_t pos = c.m;
    while (pos > 0) {
      --pos;
      if (++y[pos] < c.k) break;
      y[pos] = 0;
      if (pos == 0) return;
    }
    if (c.m == 0) return;
  }
}

struct Enumerated {
  double log_z = 0.0;
  std::vector<std::size_t> argmax;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t ties = 0;  // sequences within 1e-12 of the best
};

inline Enumerated brute_force(const CrfInstance& c) {
  Enumerated out;
  std::vector<double> scores;
  enumerate(c, [&](const std::vector<std::size_t>& y) {
    const double s = path_score(c, y);
    scores.push_back(s);
    if (s > out.best) {
      out.best = s;
      out.argmax = y;
    }
  });
  // log-sum-exp with the maximum factored out, summed in enumeration order
  double z = 0;
  for (double s : scores) z += std::exp(s - out.best);
  out.log_z = out.best + std::log(z);
  for (double s : scores)
    if (std::abs(s - out.best) <= 1e-12) ++out.ties;
  return out;
}

// ---- geometry --------------------------------------------------------------

// IoU estimated by sampling an n×n grid of pixel centers over the unit square.
inline double raster_iou(const hamnet::Box& a, const hamnet::Box& b, std::size_t n = 1000) {
  auto inside = [](const hamnet::Box& box, double x, double y) {
    return x >= box.xc - 0.5 * box.w && x < box.xc + 0.5 * box.w && y >= box.yc - 0.5 * box.h &&
           y < box.yc + 0.5 * box.h;
  };
  std::size_t in_a = 0, in_b = 0, both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
  }
  const std::size_t uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// Relation labels: 0 inside, 1 cover, 2 overlap, 3+k direction sector k.
inline std::optional<int> brute_relation(const hamnet::Box& a, const hamnet::Box& b) {
  const double ax0 = a.xc - 0.5 * a.w, ax1 = a.xc + 0.5 * a.w, ay0 = a.yc - 0.5 * a.h, ay1 = a.yc + 0.5 * a.h;
  const double bx0 = b.xc - 0.5 * b.w, bx1 = b.xc + 0.5 * b.w, by0 = b.yc - 0.5 * b.h, by1 = b.yc + 0.5 * b.h;
  if (ax0 <= bx0 && bx1 <= ax1 && ay0 <= by0 && by1 <= ay1) return 0;
  if (bx0 <= ax0 && ax1 <= bx1 && by0 <= ay0 && ay1 <= by1) return 1;
  const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = ix * iy;
  if (inter / (a.w * a.h + b.w * b.h - inter) > 0.5) return 2;
  const double dx = b.xc - a.xc, dy = b.yc - a.yc;
  if (std::sqrt(dx * dx + dy * dy) >= 0.5 * std::sqrt(2.0)) return std::nullopt;
  double angle = std::atan2(dy, dx);
  if (angle < 0) angle += 2 * M_PI;
  const int sector = static_cast<int>(std::floor(angle / (M_PI / 4))) % 8;
  return 3 + sector;
}

// (src, dst, label) triples including the super-node edges.
inline std::set<std::tuple<std::size_t, std::size_t, int>> brute_edges(const std::vector<hamnet::Box>& boxes) {
  std::set<std::tuple<std::size_t, std::size_t, int>> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) out.insert({0, i + 1, 0});
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = 0; j < boxes.size(); ++j)
      if (i != j)
        if (auto r = brute_relation(boxes[i], boxes[j])) out.insert({i + 1, j + 1, *r});
  return out;
}

}  // namespace oracle
