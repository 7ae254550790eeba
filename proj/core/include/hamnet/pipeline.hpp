#pragma once

// Training, evaluation, prediction, checkpoint persistence and the
// interaction-round sweep.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hamnet/model.hpp"

namespace hamnet {

/// Adaptive-moment optimizer over a fixed parameter list.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamList params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Global-norm clipping, applied inside step() when max_norm > 0.
  void set_clip_norm(double max_norm) { clip_norm_ = max_norm; }
  /// Returns the pre-clipping gradient norm.
  double step();
  void zero_grad();

 private:
  ParamList params_;
  double lr_, beta1_, beta2_, eps_;
  double clip_norm_ = 0.0;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainingMetadata {
  std::size_t best_epoch = 0;  // 0 = initialization
  std::size_t epochs_run = 0;
  double best_val_f1 = 0.0;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  TrainingMetadata metadata;
  std::vector<EpochRecord> log;
};

/// Minimizes mean CRF NLL with Adam. After each epoch the validation set is
/// scored; the best epoch by (F1, then lower loss) is restored into `model`
/// on return. An empty validation set keeps the last epoch. Throws
/// NumericalError naming the stage that first produced a non-finite value.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, std::ostream* log = nullptr);

struct ExampleDiagnostics {
  std::size_t index = 0;
  std::size_t objects = 0;
  double relevance_semantic = 0.0;  // mean |M^1|
  double relevance_spatial = 0.0;   // mean |M^2|
};

struct EvalReport {
  EntityScores scores;
  double mean_loss = 0.0;
  double mean_relevance = 0.0;  // averaged over examples and both views
  std::size_t zero_object_examples = 0;
  std::vector<ExampleDiagnostics> examples;

  std::string to_json() const;
  std::string to_text() const;
};

/// Decodes every example and scores entity spans. In oracle mode the gold
/// labels stand in for predictions (model outputs still feed diagnostics).
EvalReport evaluate(const Model& model, const Dataset& dataset, bool oracle = false);

std::vector<std::vector<Span>> predict_spans(const Model& model, const Dataset& dataset);
/// One JSON object per example: tokens, predicted labels and spans.
void write_predictions(const Model& model, const Dataset& dataset, const std::filesystem::path& path);

// ---- checkpoints -------------------------------------------------------------

/// Directory with manifest.json (config, dataset meta, training metadata,
/// tensor index) and one raw little-endian float64 file per tensor.
void save_checkpoint(const Model& model, const TrainingMetadata& training, const std::filesystem::path& dir);

struct LoadedCheckpoint {
  Model model;
  TrainingMetadata training;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// ---- sweep -------------------------------------------------------------------

struct SweepRow {
  std::size_t rounds = 0;
  EntityScores scores;
};

/// Trains one model per interaction-round count and scores it on eval_set.
std::vector<SweepRow> sweep_rounds(const PipelineConfig& base, const DatasetMeta& meta, const Dataset& train_set,
                                   const Dataset& val_set, const Dataset& eval_set,
                                   const std::vector<std::size_t>& rounds, std::ostream* log = nullptr);
std::string format_sweep_table(const std::vector<SweepRow>& rows);

}  // namespace hamnet
