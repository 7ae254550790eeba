#pragma once

// Dataset schema, BIO2 label handling, entity-level metrics and the
// deterministic synthetic fixture generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hamnet/tensor.hpp"

namespace hamnet {

enum class EntityType { PER = 0, LOC = 1, ORG = 2, MISC = 3 };
inline constexpr std::size_t kNumEntityTypes = 4;
inline constexpr std::size_t kNumLabels = 9;
inline constexpr std::size_t kMaxObjects = 15;
inline constexpr std::size_t kMaxSentenceLength = 128;

std::string_view entity_type_name(EntityType t);
EntityType parse_entity_type(std::string_view name);

/// The fixed BIO2 label space: O, then B-/I- pairs for PER, LOC, ORG, MISC.
/// Indices are stable: O=0, B-X = 1 + 2·type, I-X = 2 + 2·type.
struct LabelSet {
  static const std::array<std::string_view, kNumLabels>& names();
  static std::string_view name(std::size_t index);
  static std::size_t index(std::string_view name);  // throws DataError
  static bool is_begin(std::size_t index) { return index != 0 && index % 2 == 1; }
  static bool is_inside(std::size_t index) { return index != 0 && index % 2 == 0; }
  static std::optional<EntityType> type(std::size_t index);
  static std::size_t begin_of(EntityType t) { return 1 + 2 * static_cast<std::size_t>(t); }
  static std::size_t inside_of(EntityType t) { return 2 + 2 * static_cast<std::size_t>(t); }
};

/// Normalized (x_center, y_center, height, width) box in the unit image.
struct Box {
  double xc = 0.5, yc = 0.5, h = 1.0, w = 1.0;

  double x0() const { return xc - w / 2; }
  double x1() const { return xc + w / 2; }
  double y0() const { return yc - h / 2; }
  double y1() const { return yc + h / 2; }
  double area() const { return h * w; }
  bool operator==(const Box&) const = default;
};

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::size_t> labels;
  Tensor word_feats;  // [M×d]
  Tensor cls_feat;    // [d]

  std::size_t length() const { return tokens.size(); }
};

struct ObjectDetection {
  Box bbox;
  Tensor feat;  // [d_v]
  std::size_t concept_id = 0;
  double score = 0.0;
};

struct MultimodalExample {
  TaggedSentence sentence;
  Tensor image_feat;  // [d_v]
  std::vector<ObjectDetection> objects;
};

using Dataset = std::vector<MultimodalExample>;

bool operator==(const TaggedSentence& a, const TaggedSentence& b);
bool operator==(const ObjectDetection& a, const ObjectDetection& b);
bool operator==(const MultimodalExample& a, const MultimodalExample& b);

struct DatasetMeta {
  std::size_t d = 0;
  std::size_t d_v = 0;
  std::size_t concept_vocab = 0;
  std::vector<std::string> label_set;

  bool operator==(const DatasetMeta&) const = default;
};

DatasetMeta load_meta(const std::filesystem::path& path);
void save_meta(const DatasetMeta& meta, const std::filesystem::path& path);

struct LoadOptions {
  std::size_t max_objects = kMaxObjects;
  std::size_t max_len = kMaxSentenceLength;
};

/// Parses one JSONL record and validates it against every type invariant.
/// Objects are sorted by descending score and truncated; stray I-X tags are
/// repaired to B-X; boxes poking out of the unit image are clamped.
MultimodalExample parse_example(std::string_view line, const DatasetMeta& meta, std::size_t line_no,
                                const LoadOptions& options = {});
std::string serialize_example(const MultimodalExample& example);

/// Throws DataError("<path>: line <n>: field '<name>': ...") on schema violations.
Dataset load_dataset(const std::filesystem::path& path, const DatasetMeta& meta, const LoadOptions& options = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// ---- BIO2 --------------------------------------------------------------------

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  EntityType type = EntityType::PER;

  auto operator<=>(const Span&) const = default;
};

/// Rewrites every I-X that does not continue a B-X/I-X of the same type to B-X.
std::vector<std::size_t> repair_bio2(std::span<const std::size_t> labels);
std::vector<Span> spans_from_bio2(std::span<const std::size_t> labels);
std::vector<std::size_t> bio2_from_spans(std::span<const Span> spans, std::size_t length);

struct EntityScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::map<EntityType, double> per_type_f1;
};

/// Exact-match (boundaries and type) micro-averaged scores. Zero
/// denominators give 0.
EntityScores entity_f1(const std::vector<std::vector<Span>>& predicted, const std::vector<std::vector<Span>>& gold);

// ---- synthetic fixtures ------------------------------------------------------

struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t n_sentences = 32;
  std::size_t n_val = 8;
  std::size_t n_test = 8;
  std::size_t min_len = 3, max_len = 12;
  std::size_t min_objects = 0, max_objects = 6;
  std::size_t d = 32;
  std::size_t d_v = 16;
  std::size_t concept_vocab = 12;
  double relevance_rate = 0.5;
  double entity_density = 0.3;  // expected fraction of tokens inside entities
  double noise = 0.5;
  // Strength of the entity-type direction in word features; lower values
  // make the image the better source of type information.
  double text_type_signal = 0.6;
};

struct SyntheticCorpus {
  DatasetMeta meta;
  Dataset train, val, test;
  // Whether each example's image was drawn from the relevant distribution.
  std::vector<bool> train_relevant, val_relevant, test_relevant;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);
/// Writes train.jsonl, val.jsonl, test.jsonl and meta.json into dir.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace hamnet
