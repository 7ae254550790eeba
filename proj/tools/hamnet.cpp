// hamnet — command-line front end: fixture generation, training, evaluation,
// prediction, graph dumps and the interaction-round sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hamnet/errors.hpp"
#include "hamnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hamnet;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Every PipelineConfig key becomes a same-named flag; values are applied on
// top of the config file so flags win.
struct ConfigOverrides {
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    for (const auto& key : PipelineConfig::keys()) {
      cmd->add_option_function<std::string>(
             "--" + key, [this, key](const std::string& v) { values[key] = v; }, "override config key '" + key + "'")
          ->group("Config overrides");
    }
  }

  PipelineConfig resolve(const std::string& config_path) const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    for (const auto& [k, v] : values) cfg.set(k, v);
    cfg.validate();
    return cfg;
  }
};

LoadOptions load_options(const PipelineConfig& cfg) { return LoadOptions{cfg.max_objects, cfg.max_len}; }

Dataset load_split(const std::string& path, const DatasetMeta& meta, const PipelineConfig& cfg, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path configured");
  return load_dataset(path, meta, load_options(cfg));
}

// Meta defaults to meta.json next to the data file.
DatasetMeta meta_for(const std::string& explicit_meta, const std::string& data_path) {
  const fs::path p = explicit_meta.empty() ? fs::path(data_path).parent_path() / "meta.json" : fs::path(explicit_meta);
  return load_meta(p);
}

void require_compatible(const DatasetMeta& model_meta, const DatasetMeta& data_meta) {
  if (model_meta.d != data_meta.d || model_meta.d_v != data_meta.d_v ||
      model_meta.concept_vocab != data_meta.concept_vocab) {
    throw DataError("dataset dimensions (d=" + std::to_string(data_meta.d) + ", d_v=" + std::to_string(data_meta.d_v) +
                    ", concepts=" + std::to_string(data_meta.concept_vocab) +
                    ") do not match the checkpoint (d=" + std::to_string(model_meta.d) +
                    ", d_v=" + std::to_string(model_meta.d_v) +
                    ", concepts=" + std::to_string(model_meta.concept_vocab) + ")");
  }
}

std::vector<std::size_t> parse_rounds(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::size_t dots = item.find("..");
    try {
      if (dots != std::string::npos) {
        const std::size_t lo = std::stoul(item.substr(0, dots)), hi = std::stoul(item.substr(dots + 2));
        if (lo > hi) throw ConfigError("--l: empty range '" + item + "'");
        for (std::size_t l = lo; l <= hi; ++l) out.push_back(l);
      } else {
        std::size_t used = 0;
        out.push_back(std::stoul(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("--l: cannot parse '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("--l: no values");
  return out;
}

// Desk-scale sample config written next to generated fixtures.
void write_sample_config(const fs::path& dir, const SyntheticConfig& syn) {
  PipelineConfig cfg;
  cfg.d = syn.d;
  cfg.heads = 4;
  cfg.vit_layers = 1;
  cfg.rgcn_layers = 1;
  cfg.interaction_rounds = 1;
  cfg.dropout = 0.0;
  cfg.learning_rate = 3e-3;
  cfg.batch_train = 8;
  cfg.epochs = 60;
  cfg.max_len = 128;
  cfg.seed = syn.seed;
  // relative entries resolve against the config file's directory
  cfg.train = "train.jsonl";
  cfg.val = "val.jsonl";
  cfg.test = "test.jsonl";
  cfg.meta = "meta.json";
  cfg.checkpoint = "checkpoint";
  cfg.save(dir / "hamnet.cfg");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal named-entity recognition with relevance-aware visual interaction"};
  app.require_subcommand(1);

  // gen-fixtures
  SyntheticConfig syn;
  std::string fixtures_out;
  auto* gen = app.add_subcommand("gen-fixtures", "write a synthetic corpus (meta.json, train/val/test.jsonl)");
  gen->add_option("--seed", syn.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", fixtures_out, "output directory")->required();
  gen->add_option("--n-sentences", syn.n_sentences, "training sentences")->capture_default_str();
  gen->add_option("--n-val", syn.n_val)->capture_default_str();
  gen->add_option("--n-test", syn.n_test)->capture_default_str();
  gen->add_option("--min-len", syn.min_len)->capture_default_str();
  gen->add_option("--max-len", syn.max_len)->capture_default_str();
  gen->add_option("--min-objects", syn.min_objects)->capture_default_str();
  gen->add_option("--max-objects", syn.max_objects)->capture_default_str();
  gen->add_option("--d", syn.d, "word/model width")->capture_default_str();
  gen->add_option("--d-v", syn.d_v, "visual feature width")->capture_default_str();
  gen->add_option("--concept-vocab", syn.concept_vocab)->capture_default_str();
  gen->add_option("--relevance-rate", syn.relevance_rate, "fraction of examples whose image matches the text")
      ->capture_default_str();
  gen->add_option("--entity-density", syn.entity_density)->capture_default_str();
  gen->add_option("--noise", syn.noise)->capture_default_str();
  gen->add_option("--text-type-signal", syn.text_type_signal)->capture_default_str();

  // train
  std::string train_config;
  ConfigOverrides train_over;
  auto* train_cmd = app.add_subcommand("train", "train a model and write the best checkpoint");
  train_cmd->add_option("--config", train_config, "key = value config file");
  train_over.attach(train_cmd);

  // eval
  std::string eval_ckpt, eval_data, eval_meta, eval_format = "text";
  bool eval_oracle = false;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval_ckpt)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--meta", eval_meta, "dataset meta (default: meta.json beside --data)");
  eval_cmd->add_flag("--oracle", eval_oracle, "feed gold labels as predictions");
  eval_cmd->add_option("--format", eval_format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  // predict
  std::string pred_ckpt, pred_data, pred_meta, pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "decode a dataset to JSONL spans");
  pred_cmd->add_option("--ckpt", pred_ckpt)->required();
  pred_cmd->add_option("--data", pred_data)->required();
  pred_cmd->add_option("--meta", pred_meta, "dataset meta (default: meta.json beside --data)");
  pred_cmd->add_option("--out", pred_out)->required();

  // graph
  std::string graph_data, graph_meta, graph_format = "json";
  std::size_t graph_index = 0;
  auto* graph_cmd = app.add_subcommand("graph", "dump the spatial graph of one example");
  graph_cmd->add_option("--data", graph_data)->required();
  graph_cmd->add_option("--meta", graph_meta, "dataset meta (default: meta.json beside --data)");
  graph_cmd->add_option("--index", graph_index)->capture_default_str();
  graph_cmd->add_option("--format", graph_format)->check(CLI::IsMember({"json", "dot"}))->capture_default_str();

  // sweep-l
  std::string sweep_config, sweep_l = "1,2,3,4,5";
  ConfigOverrides sweep_over;
  auto* sweep_cmd = app.add_subcommand("sweep-l", "train/evaluate once per interaction-round count");
  sweep_cmd->add_option("--config", sweep_config);
  sweep_cmd->add_option("--l", sweep_l, "comma list or range, e.g. 1,2,3 or 1..5")->capture_default_str();
  sweep_over.attach(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const SyntheticCorpus corpus = generate_synthetic(syn);
      write_synthetic(corpus, fixtures_out);
      write_sample_config(fs::path(fixtures_out), syn);
      std::cout << "wrote " << corpus.train.size() << "/" << corpus.val.size() << "/" << corpus.test.size()
                << " examples to " << fixtures_out << "\n";
    } else if (*train_cmd) {
      const PipelineConfig cfg = train_over.resolve(train_config);
      if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint path configured");
      const DatasetMeta meta = load_meta(cfg.meta.empty() ? fs::path(cfg.train).parent_path() / "meta.json"
                                                          : fs::path(cfg.meta));
      const Dataset train_set = load_split(cfg.train, meta, cfg, "train");
      const Dataset val_set = cfg.val.empty() ? Dataset{} : load_dataset(cfg.val, meta, load_options(cfg));
      Model model(cfg, meta);
      const TrainResult result = train(model, train_set, val_set, &std::cout);
      save_checkpoint(model, result.metadata, cfg.checkpoint);
      const EvalReport report = evaluate(model, train_set);
      std::printf("best epoch %zu (val F1 %.4f); train F1 %.4f; checkpoint %s\n", result.metadata.best_epoch,
                  result.metadata.best_val_f1, report.scores.f1, cfg.checkpoint.c_str());
    } else if (*eval_cmd) {
      const LoadedCheckpoint ckpt = load_checkpoint(eval_ckpt);
      const DatasetMeta meta = meta_for(eval_meta, eval_data);
      require_compatible(ckpt.model.meta(), meta);
      const Dataset data = load_dataset(eval_data, meta, load_options(ckpt.model.config()));
      const EvalReport report = evaluate(ckpt.model, data, eval_oracle);
      std::cout << (eval_format == "json" ? report.to_json() + "\n" : report.to_text());
    } else if (*pred_cmd) {
      const LoadedCheckpoint ckpt = load_checkpoint(pred_ckpt);
      const DatasetMeta meta = meta_for(pred_meta, pred_data);
      require_compatible(ckpt.model.meta(), meta);
      const Dataset data = load_dataset(pred_data, meta, load_options(ckpt.model.config()));
      write_predictions(ckpt.model, data, pred_out);
      std::cout << "wrote " << data.size() << " predictions to " << pred_out << "\n";
    } else if (*graph_cmd) {
      const DatasetMeta meta = meta_for(graph_meta, graph_data);
      const Dataset data = load_dataset(graph_data, meta);
      if (graph_index >= data.size()) {
        throw DataError("--index " + std::to_string(graph_index) + " out of range (" + std::to_string(data.size()) +
                        " examples)");
      }
      const auto& ex = data[graph_index];
      // Geometry only: node features are zero placeholders.
      const SpatialGraph g =
          build_graph(Tensor::zeros({meta.d}), Tensor::zeros({ex.objects.size(), meta.d}), ex.objects);
      std::cout << (graph_format == "dot" ? graph_to_dot(g) : graph_to_json(g) + "\n");
    } else if (*sweep_cmd) {
      const PipelineConfig cfg = sweep_over.resolve(sweep_config);
      const auto rounds = parse_rounds(sweep_l);
      const DatasetMeta meta = load_meta(cfg.meta.empty() ? fs::path(cfg.train).parent_path() / "meta.json"
                                                          : fs::path(cfg.meta));
      const Dataset train_set = load_split(cfg.train, meta, cfg, "train");
      const Dataset val_set = cfg.val.empty() ? Dataset{} : load_dataset(cfg.val, meta, load_options(cfg));
      const Dataset eval_set = cfg.test.empty() ? val_set : load_dataset(cfg.test, meta, load_options(cfg));
      const auto rows = sweep_rounds(cfg, meta, train_set, val_set, eval_set, rounds, &std::cerr);
      std::cout << format_sweep_table(rows);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const ShapeError& e) {
    std::cerr << "dimension mismatch: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
