#pragma once

// Linear-chain CRF over the label space. A labeling y of length M scores
//   score(y) = start[y_1] + sum_i E[i, y_i] + sum_i T[y_i, y_{i+1}] + stop[y_M]
// and p(y) = exp(score(y) - log Z). All dynamic programs run in log space.

#include <vector>

#include "hamnet/nn.hpp"

namespace hamnet {

struct EmissionTable {
  Tensor scores;  // [M×K]

  std::size_t length() const { return scores.rows(); }
  std::size_t labels() const { return scores.cols(); }
};

struct TransitionTable {
  Tensor transitions;  // [K×K], row = from, column = to
  Tensor start;        // [K]
  Tensor stop;         // [K]

  static TransitionTable zeros(std::size_t labels);
  std::size_t labels() const { return transitions.rows(); }
};

struct CrfParams {
  Linear emission;  // d -> K
  TransitionTable table;
  // Masks BIO2-invalid moves (O -> I-X, B-X -> I-Y, ...) during decoding only.
  bool bio_constraints = false;

  static CrfParams make(std::size_t d, std::size_t labels, Initializer& init);
  void collect(const std::string& prefix, ParamList& out) const;
};

double sequence_score(const EmissionTable& emissions, const TransitionTable& table, std::span<const std::size_t> labels);

/// Forward algorithm; throws Error when the sequence is empty.
double log_partition(const EmissionTable& emissions, const TransitionTable& table);

/// Differentiable log Z - score(gold) with respect to emissions and all three
/// transition tensors. Gradients are marginal minus observed feature counts.
Tensor crf_nll(const EmissionTable& emissions, const TransitionTable& table, std::span<const std::size_t> gold);
double nll_loss(const EmissionTable& emissions, const TransitionTable& table, std::span<const std::size_t> gold);

struct ViterbiResult {
  std::vector<std::size_t> labels;
  double score = 0.0;
};

/// Highest-scoring labeling. Ties go to the smaller label index, both at the
/// final position and at every backpointer.
ViterbiResult viterbi(const EmissionTable& emissions, const TransitionTable& table, bool bio_constraints = false);

/// Additive -inf mask for BIO2-invalid transitions ([K×K]) and starts ([K]).
/// Only defined for the nine-label set.
std::vector<double> bio2_transition_mask();
std::vector<double> bio2_start_mask();

}  // namespace hamnet
