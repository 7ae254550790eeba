#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hamnet {

/// Every run-time knob of the pipeline. Keys in config files and command-line
/// overrides use the member names verbatim.
struct PipelineConfig {
  std::size_t d = 768;
  std::size_t heads = 12;
  std::size_t text_layers = 1;
  std::size_t vit_layers = 4;
  std::size_t rgcn_layers = 2;
  std::size_t interaction_rounds = 3;
  double dropout = 0.1;
  double learning_rate = 3e-5;
  std::size_t batch_train = 32;
  std::size_t batch_eval = 16;
  std::size_t epochs = 60;
  std::size_t max_len = 128;
  std::uint64_t seed = 42;
  std::size_t max_objects = 15;
  std::size_t patience = 10;   // 0 disables early stopping
  double clip_norm = 0.0;      // 0 disables clipping
  std::string rgcn_activation = "relu";
  std::string gate_activation = "tanh";
  std::string gate_variant = "sigmoid";      // sigmoid | literal
  std::string relevance_variant = "vector";  // vector | scalar
  bool text_positions = true;
  bool bio_constraints = false;
  std::string train;
  std::string val;
  std::string test;
  std::string meta;
  std::string checkpoint;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// Sets one key from its textual value; throws ConfigError for unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  static const std::vector<std::string>& keys();

  /// Flat `key = value` file; `#` starts a comment. Relative paths are
  /// resolved against the file's directory.
  static PipelineConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace hamnet
