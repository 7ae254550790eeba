#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamnet/errors.hpp"
#include "hamnet/pipeline.hpp"

namespace hamnet {

// ---- Adam --------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(ParamList params, double learning_rate, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double AdamOptimizer::step() {
  double norm_sq = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) norm_sq += g * g;
  }
  const double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  const double factor = clip_norm_ > 0.0 && norm > clip_norm_ ? clip_norm_ / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto w = t.mutable_values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * factor;
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
      w[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
    }
  }
  return norm;
}

// ---- training ----------------------------------------------------------------

TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, std::ostream* log) {
  const PipelineConfig& cfg = model.config();
  AdamOptimizer opt(model.named_params(), cfg.learning_rate);
  opt.set_clip_norm(cfg.clip_norm);

  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 dropout_rng(cfg.seed + 1);
  ForwardContext ctx{true, cfg.dropout, &dropout_rng, nullptr};

  TrainResult result;
  result.metadata.seed = cfg.seed;
  auto best = model.snapshot();
  double best_f1 = -1.0, best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_train) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_train);
      const double inv = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        Tensor l = model.loss(train_set[order[k]], ctx);
        total += l.item();
        scale(l, inv).backward();
      }
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_set.empty() ? 0.0 : total / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const EvalReport report = evaluate(model, val_set);
      rec.val_f1 = report.scores.f1;
      rec.val_loss = report.mean_loss;
    }
    result.log.push_back(rec);
    result.metadata.epochs_run = epoch;
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.6f val_loss %.6f val_f1 %.4f\n", epoch, rec.train_loss,
                    rec.val_loss, rec.val_f1);
      *log << buf << std::flush;
    }

    const bool improved =
        val_set.empty() || rec.val_f1 > best_f1 || (rec.val_f1 == best_f1 && rec.val_loss < best_loss);
    if (improved) {
      best = model.snapshot();
      best_f1 = rec.val_f1;
      best_loss = rec.val_loss;
      result.metadata.best_epoch = epoch;
      result.metadata.best_val_f1 = rec.val_f1;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      if (log) *log << "early stop after " << epoch << " epochs (best epoch " << result.metadata.best_epoch << ")\n";
      break;
    }
  }
  model.restore(best);
  return result;
}

// ---- evaluation --------------------------------------------------------------

namespace {

double mean_abs(const Tensor& t) {
  if (t.numel() == 0) return 0.0;
  double s = 0.0;
  for (double v : t.values()) s += std::abs(v);
  return s / static_cast<double>(t.numel());
}

}  // namespace

EvalReport evaluate(const Model& model, const Dataset& dataset, bool oracle) {
  EvalReport report;
  std::vector<std::vector<Span>> pred, gold;
  double loss = 0.0, rel = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& ex = dataset[i];
    const StageOutputs s = model.forward(ex);
    const auto& crf = model.params().crf;
    loss += crf_nll(s.emissions, crf.table, ex.sentence.labels).item();
    gold.push_back(spans_from_bio2(ex.sentence.labels));
    if (oracle) {
      pred.push_back(gold.back());
    } else {
      pred.push_back(spans_from_bio2(viterbi(s.emissions, crf.table, crf.bio_constraints).labels));
    }
    ExampleDiagnostics diag{i, ex.objects.size(), mean_abs(s.relevance_semantic.relevance),
                            mean_abs(s.relevance_spatial.relevance)};
    rel += 0.5 * (diag.relevance_semantic + diag.relevance_spatial);
    if (ex.objects.empty()) ++report.zero_object_examples;
    report.examples.push_back(diag);
  }
  report.scores = entity_f1(pred, gold);
  if (!dataset.empty()) {
    report.mean_loss = loss / static_cast<double>(dataset.size());
    report.mean_relevance = rel / static_cast<double>(dataset.size());
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["precision"] = scores.precision;
  j["recall"] = scores.recall;
  j["f1"] = scores.f1;
  j["true_positives"] = scores.true_positives;
  j["predicted"] = scores.predicted;
  j["gold"] = scores.gold;
  for (const auto& [t, f] : scores.per_type_f1) j["per_type_f1"][std::string(entity_type_name(t))] = f;
  j["mean_loss"] = mean_loss;
  j["mean_relevance"] = mean_relevance;
  j["zero_object_examples"] = zero_object_examples;
  j["examples"] = nlohmann::json::array();
  for (const auto& e : examples) {
    j["examples"].push_back({{"index", e.index},
                             {"objects", e.objects},
                             {"no_objects", e.objects == 0},
                             {"relevance_semantic", e.relevance_semantic},
                             {"relevance_spatial", e.relevance_spatial}});
  }
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "P %.4f  R %.4f  F1 %.4f  (tp %zu, pred %zu, gold %zu)\n", scores.precision,
                scores.recall, scores.f1, scores.true_positives, scores.predicted, scores.gold);
  os << buf;
  for (const auto& [t, f] : scores.per_type_f1) {
    std::snprintf(buf, sizeof buf, "  %-5s F1 %.4f\n", std::string(entity_type_name(t)).c_str(), f);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mean relevance |M| %.4f, examples without objects: %zu\n", mean_relevance,
                zero_object_examples);
  os << buf;
  return os.str();
}

std::vector<std::vector<Span>> predict_spans(const Model& model, const Dataset& dataset) {
  std::vector<std::vector<Span>> out;
  for (const auto& ex : dataset) out.push_back(spans_from_bio2(model.decode(ex)));
  return out;
}

void write_predictions(const Model& model, const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& ex : dataset) {
    const auto labels = model.decode(ex);
    nlohmann::json j;
    j["tokens"] = ex.sentence.tokens;
    j["labels"] = nlohmann::json::array();
    for (auto l : labels) j["labels"].push_back(std::string(LabelSet::name(l)));
    j["spans"] = nlohmann::json::array();
    for (const auto& s : spans_from_bio2(labels)) {
      j["spans"].push_back({{"start", s.start}, {"end", s.end}, {"type", std::string(entity_type_name(s.type))}});
    }
    out << j.dump() << '\n';
  }
}

// ---- sweep -------------------------------------------------------------------

std::vector<SweepRow> sweep_rounds(const PipelineConfig& base, const DatasetMeta& meta, const Dataset& train_set,
                                   const Dataset& val_set, const Dataset& eval_set,
                                   const std::vector<std::size_t>& rounds, std::ostream* log) {
  if (rounds.empty()) throw ConfigError("sweep: no interaction round counts given");
  std::vector<SweepRow> rows;
  for (std::size_t l : rounds) {
    PipelineConfig cfg = base;
    cfg.interaction_rounds = l;
    Model model(cfg, meta);
    if (log) *log << "== interaction_rounds " << l << " ==\n";
    train(model, train_set, val_set, log);
    rows.push_back({l, evaluate(model, eval_set).scores});
  }
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "L    P       R       F1\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4zu %.4f  %.4f  %.4f\n", r.rounds, r.scores.precision, r.scores.recall,
                  r.scores.f1);
    os << buf;
  }
  return os.str();
}

}  // namespace hamnet
