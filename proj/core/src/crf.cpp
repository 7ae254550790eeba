#include "hamnet/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hamnet/data.hpp"
#include "hamnet/errors.hpp"

namespace hamnet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> xs) {
  double mx = kNegInf;
  for (double x : xs) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

void validate(const EmissionTable& e, const TransitionTable& t) {
  if (!e.scores.defined() || e.scores.rank() != 2) throw ShapeError("crf: emissions must be a matrix");
  if (e.length() == 0) throw Error("crf: empty sequence");
  const std::size_t k = e.labels();
  if (t.transitions.shape() != Shape{k, k} || t.start.shape() != Shape{k} || t.stop.shape() != Shape{k}) {
    throw ShapeError("crf: transition tables do not match " + std::to_string(k) + " labels");
  }
}

// alpha[t*K + j]: log-sum of all prefixes ending in j at position t.
std::vector<double> forward_table(const EmissionTable& e, const TransitionTable& t) {
  const std::size_t m = e.length(), k = e.labels();
  const auto em = e.scores.values(), tr = t.transitions.values();
  std::vector<double> alpha(m * k), buf(k);
  for (std::size_t j = 0; j < k; ++j) alpha[j] = t.start[j] + em[j];
  for (std::size_t s = 1; s < m; ++s)
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) buf[i] = alpha[(s - 1) * k + i] + tr[i * k + j];
      alpha[s * k + j] = log_sum_exp(buf) + em[s * k + j];
    }
  return alpha;
}

std::vector<double> backward_table(const EmissionTable& e, const TransitionTable& t) {
  const std::size_t m = e.length(), k = e.labels();
  const auto em = e.scores.values(), tr = t.transitions.values();
  std::vector<double> beta(m * k), buf(k);
  for (std::size_t i = 0; i < k; ++i) beta[(m - 1) * k + i] = t.stop[i];
  for (std::size_t s = m - 1; s-- > 0;)
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) buf[j] = tr[i * k + j] + em[(s + 1) * k + j] + beta[(s + 1) * k + j];
      beta[s * k + i] = log_sum_exp(buf);
    }
  return beta;
}

double finish(const std::vector<double>& alpha, const EmissionTable& e, const TransitionTable& t) {
  const std::size_t m = e.length(), k = e.labels();
  std::vector<double> last(k);
  for (std::size_t j = 0; j < k; ++j) last[j] = alpha[(m - 1) * k + j] + t.stop[j];
  return log_sum_exp(last);
}

}  // namespace

TransitionTable TransitionTable::zeros(std::size_t labels) {
  return TransitionTable{Tensor::zeros({labels, labels}), Tensor::zeros({labels}), Tensor::zeros({labels})};
}

CrfParams CrfParams::make(std::size_t d, std::size_t labels, Initializer& init) {
  CrfParams p;
  p.emission = Linear::make(d, labels, init);
  p.table = TransitionTable{init.zeros({labels, labels}), init.zeros({labels}), init.zeros({labels})};
  return p;
}

void CrfParams::collect(const std::string& prefix, ParamList& out) const {
  emission.collect(prefix + ".emission", out);
  out.push_back({prefix + ".transitions", table.transitions});
  out.push_back({prefix + ".start", table.start});
  out.push_back({prefix + ".stop", table.stop});
}

double sequence_score(const EmissionTable& e, const TransitionTable& t, std::span<const std::size_t> labels) {
  validate(e, t);
  const std::size_t m = e.length(), k = e.labels();
  if (labels.size() != m) throw ShapeError("crf: label sequence length differs from emissions");
  for (auto y : labels)
    if (y >= k) throw DataError("crf: label index " + std::to_string(y) + " out of range");
  double s = t.start[labels[0]] + t.stop[labels[m - 1]];
  for (std::size_t i = 0; i < m; ++i) s += e.scores[i * k + labels[i]];
  for (std::size_t i = 0; i + 1 < m; ++i) s += t.transitions[labels[i] * k + labels[i + 1]];
  return s;
}

double log_partition(const EmissionTable& e, const TransitionTable& t) {
  validate(e, t);
  return finish(forward_table(e, t), e, t);
}

Tensor crf_nll(const EmissionTable& e, const TransitionTable& t, std::span<const std::size_t> gold) {
  validate(e, t);
  const double gold_score = sequence_score(e, t, gold);
  const auto alpha = forward_table(e, t);
  const double log_z = finish(alpha, e, t);
  const double loss = log_z - gold_score;

  auto en = e.scores.node(), tn = t.transitions.node(), sn = t.start.node(), pn = t.stop.node();
  std::vector<std::size_t> y(gold.begin(), gold.end());
  EmissionTable ec = e;
  TransitionTable tc = t;
  return make_op("crf_nll", {1}, {loss}, {e.scores, t.transitions, t.start, t.stop},
                 [=, alpha = alpha](std::span<const double> g) {
                   const std::size_t m = ec.length(), k = ec.labels();
                   const double go = g[0];
                   const auto beta = backward_table(ec, tc);
                   const auto em = ec.scores.values(), tr = tc.transitions.values();
                   for (std::size_t s = 0; s < m; ++s)
                     for (std::size_t j = 0; j < k; ++j) {
                       const double p = std::exp(alpha[s * k + j] + beta[s * k + j] - log_z);
                       en->accumulate(s * k + j, go * (p - (y[s] == j ? 1.0 : 0.0)));
                       if (s == 0) sn->accumulate(j, go * (p - (y[0] == j ? 1.0 : 0.0)));
                       if (s == m - 1) pn->accumulate(j, go * (p - (y[m - 1] == j ? 1.0 : 0.0)));
                     }
                   if (!tn->requires_grad) return;
                   for (std::size_t s = 0; s + 1 < m; ++s) {
                     for (std::size_t i = 0; i < k; ++i)
                       for (std::size_t j = 0; j < k; ++j) {
                         const double p = std::exp(alpha[s * k + i] + tr[i * k + j] + em[(s + 1) * k + j] +
                                                   beta[(s + 1) * k + j] - log_z);
                         tn->accumulate(i * k + j, go * p);
                       }
                     tn->accumulate(y[s] * k + y[s + 1], -go);
                   }
                 });
}

double nll_loss(const EmissionTable& e, const TransitionTable& t, std::span<const std::size_t> gold) {
  return crf_nll(e, t, gold).item();
}

ViterbiResult viterbi(const EmissionTable& e, const TransitionTable& t, bool bio_constraints) {
  validate(e, t);
  const std::size_t m = e.length(), k = e.labels();
  if (bio_constraints && k != kNumLabels) throw ConfigError("BIO2 constraints need the nine-label set");
  std::vector<double> tr(t.transitions.values().begin(), t.transitions.values().end());
  std::vector<double> start(t.start.values().begin(), t.start.values().end());
  if (bio_constraints) {
    const auto tm = bio2_transition_mask(), sm = bio2_start_mask();
    for (std::size_t i = 0; i < tr.size(); ++i) tr[i] += tm[i];
    for (std::size_t i = 0; i < k; ++i) start[i] += sm[i];
  }
  const auto em = e.scores.values();
  std::vector<double> score(k), next(k);
  std::vector<std::size_t> back(m * k, 0);
  for (std::size_t j = 0; j < k; ++j) score[j] = start[j] + em[j];
  for (std::size_t s = 1; s < m; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const double v = score[i] + tr[i * k + j];
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      next[j] = best + em[s * k + j];
      back[s * k + j] = arg;
    }
    std::swap(score, next);
  }
  double best = kNegInf;
  std::size_t last = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double v = score[j] + t.stop[j];
    if (v > best) {
      best = v;
      last = j;
    }
  }
  ViterbiResult out;
  out.labels.assign(m, 0);
  out.labels[m - 1] = last;
  for (std::size_t s = m - 1; s > 0; --s) out.labels[s - 1] = back[s * k + out.labels[s]];
  out.score = best;
  return out;
}

std::vector<double> bio2_transition_mask() {
  std::vector<double> mask(kNumLabels * kNumLabels, 0.0);
  for (std::size_t from = 0; from < kNumLabels; ++from)
    for (std::size_t to = 0; to < kNumLabels; ++to) {
      if (!LabelSet::is_inside(to)) continue;
      if (from == 0 || LabelSet::type(from) != LabelSet::type(to)) mask[from * kNumLabels + to] = kNegInf;
    }
  return mask;
}

std::vector<double> bio2_start_mask() {
  std::vector<double> mask(kNumLabels, 0.0);
  for (std::size_t j = 0; j < kNumLabels; ++j)
    if (LabelSet::is_inside(j)) mask[j] = kNegInf;
  return mask;
}

}  // namespace hamnet
