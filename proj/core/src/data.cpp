#include "hamnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamnet/errors.hpp"

namespace hamnet {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "B-MISC", "I-MISC"};

constexpr std::array<std::string_view, kNumEntityTypes> kTypeNames = {"PER", "LOC", "ORG", "MISC"};

constexpr double kBoxTolerance = 1e-12;

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.defined() != b.defined()) return false;
  if (!a.defined()) return true;
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

[[noreturn]] void fail(std::size_t line_no, const std::string& field, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": field '" + field + "': " + what);
}

std::vector<double> read_vector(const json& j, std::size_t expected, std::size_t line_no, const std::string& field) {
  if (!j.is_array()) fail(line_no, field, "expected an array of numbers");
  if (j.size() != expected) {
    fail(line_no, field, "dimension " + std::to_string(j.size()) + " does not match meta " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_number()) fail(line_no, field, "non-numeric entry");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(line_no, field, "non-finite entry");
    out.push_back(x);
  }
  return out;
}

const json& require(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(line_no, key, "missing");
  return *it;
}

Box clamp_box(Box b, std::size_t line_no, const std::string& field) {
  if (!(b.h > 0.0) || !(b.w > 0.0)) fail(line_no, field, "box height and width must be positive");
  const bool outside = b.x0() < -kBoxTolerance || b.y0() < -kBoxTolerance || b.x1() > 1.0 + kBoxTolerance ||
                       b.y1() > 1.0 + kBoxTolerance;
  if (!outside) return b;
  const double x0 = std::clamp(b.x0(), 0.0, 1.0), x1 = std::clamp(b.x1(), 0.0, 1.0);
  const double y0 = std::clamp(b.y0(), 0.0, 1.0), y1 = std::clamp(b.y1(), 0.0, 1.0);
  if (!(x1 > x0) || !(y1 > y0)) fail(line_no, field, "box lies outside the image");
  return Box{(x0 + x1) / 2, (y0 + y1) / 2, y1 - y0, x1 - x0};
}

json tensor_json(const Tensor& t) {
  if (t.rank() == 1) return json(std::vector<double>(t.values().begin(), t.values().end()));
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    rows.push_back(std::vector<double>(t.values().begin() + r * t.cols(), t.values().begin() + (r + 1) * t.cols()));
  }
  return rows;
}

}  // namespace

std::string_view entity_type_name(EntityType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

EntityType parse_entity_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i)
    if (kTypeNames[i] == name) return static_cast<EntityType>(i);
  throw DataError("unknown entity type '" + std::string(name) + "'");
}

const std::array<std::string_view, kNumLabels>& LabelSet::names() { return kLabelNames; }

std::string_view LabelSet::name(std::size_t index) {
  if (index >= kNumLabels) throw DataError("label index " + std::to_string(index) + " out of range");
  return kLabelNames[index];
}

std::size_t LabelSet::index(std::string_view name) {
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (kLabelNames[i] == name) return i;
  throw DataError("unknown label '" + std::string(name) + "'");
}

std::optional<EntityType> LabelSet::type(std::size_t index) {
  if (index == 0 || index >= kNumLabels) return std::nullopt;
  return static_cast<EntityType>((index - 1) / 2);
}

bool operator==(const TaggedSentence& a, const TaggedSentence& b) {
  return a.tokens == b.tokens && a.labels == b.labels && same_values(a.word_feats, b.word_feats) &&
         same_values(a.cls_feat, b.cls_feat);
}

bool operator==(const ObjectDetection& a, const ObjectDetection& b) {
  return a.bbox == b.bbox && same_values(a.feat, b.feat) && a.concept_id == b.concept_id && a.score == b.score;
}

bool operator==(const MultimodalExample& a, const MultimodalExample& b) {
  return a.sentence == b.sentence && same_values(a.image_feat, b.image_feat) && a.objects == b.objects;
}

// ---- meta --------------------------------------------------------------------

DatasetMeta load_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open meta file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  DatasetMeta meta;
  try {
    meta.d = j.at("d").get<std::size_t>();
    meta.d_v = j.at("d_v").get<std::size_t>();
    meta.concept_vocab = j.at("concept_vocab").get<std::size_t>();
    meta.label_set = j.at("label_set").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (meta.d == 0 || meta.d_v == 0 || meta.concept_vocab == 0) {
    throw DataError(path.string() + ": d, d_v and concept_vocab must be positive");
  }
  const std::vector<std::string> expected(kLabelNames.begin(), kLabelNames.end());
  if (meta.label_set != expected) throw DataError(path.string() + ": label_set must be the BIO2 set in canonical order");
  return meta;
}

void save_meta(const DatasetMeta& meta, const std::filesystem::path& path) {
  json j;
  j["d"] = meta.d;
  j["d_v"] = meta.d_v;
  j["concept_vocab"] = meta.concept_vocab;
  j["label_set"] = meta.label_set;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---- examples ----------------------------------------------------------------

MultimodalExample parse_example(std::string_view line, const DatasetMeta& meta, std::size_t line_no,
                                const LoadOptions& options) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");

  MultimodalExample ex;
  auto& s = ex.sentence;
  const json& tokens = require(j, "tokens", line_no);
  if (!tokens.is_array()) fail(line_no, "tokens", "expected an array of strings");
  for (const auto& t : tokens) {
    if (!t.is_string()) fail(line_no, "tokens", "non-string token");
    s.tokens.push_back(t.get<std::string>());
  }
  const std::size_t m = s.tokens.size();
  if (m == 0) fail(line_no, "tokens", "empty sentence");
  if (m > options.max_len) {
    fail(line_no, "tokens", "length " + std::to_string(m) + " exceeds max_len " + std::to_string(options.max_len));
  }

  const json& labels = require(j, "labels", line_no);
  if (!labels.is_array()) fail(line_no, "labels", "expected an array");
  if (labels.size() != m) {
    fail(line_no, "labels",
         "length " + std::to_string(labels.size()) + " does not match tokens length " + std::to_string(m));
  }
  std::vector<std::size_t> raw;
  for (const auto& l : labels) {
    try {
      if (l.is_string()) {
        raw.push_back(LabelSet::index(l.get<std::string>()));
      } else if (l.is_number_unsigned() && l.get<std::size_t>() < kNumLabels) {
        raw.push_back(l.get<std::size_t>());
      } else {
        fail(line_no, "labels", "invalid label " + l.dump());
      }
    } catch (const DataError& e) {
      if (std::string_view(e.what()).starts_with("line ")) throw;
      fail(line_no, "labels", e.what());
    }
  }
  s.labels = repair_bio2(raw);

  s.cls_feat = Tensor::from({meta.d}, read_vector(require(j, "cls_feat", line_no), meta.d, line_no, "cls_feat"));
  const json& words = require(j, "word_feats", line_no);
  if (!words.is_array() || words.size() != m) {
    fail(line_no, "word_feats", "expected " + std::to_string(m) + " rows");
  }
  std::vector<double> wf;
  wf.reserve(m * meta.d);
  for (const auto& r : words) {
    auto v = read_vector(r, meta.d, line_no, "word_feats");
    wf.insert(wf.end(), v.begin(), v.end());
  }
  s.word_feats = Tensor::from({m, meta.d}, std::move(wf));

  ex.image_feat =
      Tensor::from({meta.d_v}, read_vector(require(j, "image_feat", line_no), meta.d_v, line_no, "image_feat"));

  const json& objects = require(j, "objects", line_no);
  if (!objects.is_array()) fail(line_no, "objects", "expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const json& o = objects[i];
    const std::string field = "objects[" + std::to_string(i) + "]";
    if (!o.is_object()) fail(line_no, field, "expected an object");
    ObjectDetection det;
    auto b = read_vector(require(o, "bbox", line_no), 4, line_no, field + ".bbox");
    det.bbox = clamp_box(Box{b[0], b[1], b[2], b[3]}, line_no, field + ".bbox");
    det.feat = Tensor::from({meta.d_v}, read_vector(require(o, "feat", line_no), meta.d_v, line_no, field + ".feat"));
    const json& cid = require(o, "concept_id", line_no);
    if (!cid.is_number_integer() || cid.get<long long>() < 0 ||
        static_cast<std::size_t>(cid.get<long long>()) >= meta.concept_vocab) {
      fail(line_no, field + ".concept_id", "must be an integer in [0, " + std::to_string(meta.concept_vocab) + ")");
    }
    det.concept_id = cid.get<std::size_t>();
    const json& sc = require(o, "score", line_no);
    if (!sc.is_number() || !(sc.get<double>() >= 0.0 && sc.get<double>() <= 1.0)) {
      fail(line_no, field + ".score", "must be a number in [0,1]");
    }
    det.score = sc.get<double>();
    ex.objects.push_back(std::move(det));
  }
  std::stable_sort(ex.objects.begin(), ex.objects.end(),
                   [](const ObjectDetection& a, const ObjectDetection& b) { return a.score > b.score; });
  if (ex.objects.size() > options.max_objects) ex.objects.resize(options.max_objects);
  return ex;
}

std::string serialize_example(const MultimodalExample& ex) {
  json j;
  j["tokens"] = ex.sentence.tokens;
  json labels = json::array();
  for (auto l : ex.sentence.labels) labels.push_back(std::string(LabelSet::name(l)));
  j["labels"] = labels;
  j["cls_feat"] = tensor_json(ex.sentence.cls_feat);
  j["word_feats"] = tensor_json(ex.sentence.word_feats);
  j["image_feat"] = tensor_json(ex.image_feat);
  json objs = json::array();
  for (const auto& o : ex.objects) {
    json oj;
    oj["bbox"] = {o.bbox.xc, o.bbox.yc, o.bbox.h, o.bbox.w};
    oj["feat"] = tensor_json(o.feat);
    oj["concept_id"] = o.concept_id;
    oj["score"] = o.score;
    objs.push_back(std::move(oj));
  }
  j["objects"] = objs;
  return j.dump();
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetMeta& meta, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_example(line, meta, line_no, options));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& ex : dataset) out << serialize_example(ex) << '\n';
}

// ---- BIO2 --------------------------------------------------------------------

std::vector<std::size_t> repair_bio2(std::span<const std::size_t> labels) {
  std::vector<std::size_t> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!LabelSet::is_inside(out[i])) continue;
    const auto t = LabelSet::type(out[i]);
    const bool continues = i > 0 && out[i - 1] != 0 && LabelSet::type(out[i - 1]) == t;
    if (!continues) out[i] = LabelSet::begin_of(*t);
  }
  return out;
}

std::vector<Span> spans_from_bio2(std::span<const std::size_t> labels) {
  const auto repaired = repair_bio2(labels);
  std::vector<Span> spans;
  for (std::size_t i = 0; i < repaired.size();) {
    if (!LabelSet::is_begin(repaired[i])) {
      ++i;
      continue;
    }
    const EntityType t = *LabelSet::type(repaired[i]);
    std::size_t j = i + 1;
    while (j < repaired.size() && repaired[j] == LabelSet::inside_of(t)) ++j;
    spans.push_back({i, j, t});
    i = j;
  }
  return spans;
}

std::vector<std::size_t> bio2_from_spans(std::span<const Span> spans, std::size_t length) {
  std::vector<std::size_t> out(length, 0);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw DataError("span out of range");
    out[s.start] = LabelSet::begin_of(s.type);
    for (std::size_t i = s.start + 1; i < s.end; ++i) out[i] = LabelSet::inside_of(s.type);
  }
  return out;
}

namespace {

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

struct Counts {
  std::size_t tp = 0, pred = 0, gold = 0;
};

}  // namespace

EntityScores entity_f1(const std::vector<std::vector<Span>>& predicted, const std::vector<std::vector<Span>>& gold) {
  if (predicted.size() != gold.size()) throw DataError("entity_f1: sentence counts differ");
  Counts total;
  std::array<Counts, kNumEntityTypes> by_type{};
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::vector<Span> p = predicted[s], g = gold[s];
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::vector<Span> hits;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(hits));
    total.tp += hits.size();
    total.pred += p.size();
    total.gold += g.size();
    for (const auto& x : p) ++by_type[static_cast<std::size_t>(x.type)].pred;
    for (const auto& x : g) ++by_type[static_cast<std::size_t>(x.type)].gold;
    for (const auto& x : hits) ++by_type[static_cast<std::size_t>(x.type)].tp;
  }
  auto f1_of = [](const Counts& c) {
    const double p = safe_div(static_cast<double>(c.tp), static_cast<double>(c.pred));
    const double r = safe_div(static_cast<double>(c.tp), static_cast<double>(c.gold));
    return std::array<double, 3>{p, r, safe_div(2 * p * r, p + r)};
  };
  EntityScores out;
  const auto prf = f1_of(total);
  out.precision = prf[0];
  out.recall = prf[1];
  out.f1 = prf[2];
  out.true_positives = total.tp;
  out.predicted = total.pred;
  out.gold = total.gold;
  for (std::size_t t = 0; t < kNumEntityTypes; ++t) out.per_type_f1[static_cast<EntityType>(t)] = f1_of(by_type[t])[2];
  return out;
}

// ---- synthetic fixtures ------------------------------------------------------

namespace {

class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    for (auto& p : structure_proto_) p = gaussian(cfg.d, 1.0);
    for (auto& p : type_proto_) p = gaussian(cfg.d, 1.0);
    for (auto& p : image_type_proto_) p = gaussian(cfg.d_v, 1.0);
    for (auto& p : object_type_proto_) p = gaussian(cfg.d_v, 1.0);
    // Renewal argument: starting an entity (mean length 2) with probability p
    // at each free position yields an entity-token fraction of 2p/(1+p).
    start_prob_ = cfg.entity_density / (2.0 - cfg.entity_density);
  }

  void fill(Dataset& out, std::vector<bool>& relevant, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool rel = std::bernoulli_distribution(cfg_.relevance_rate)(rng_);
      out.push_back(example(rel));
      relevant.push_back(rel);
    }
  }

 private:
  std::vector<double> gaussian(std::size_t n, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng_);
    return v;
  }

  std::size_t uniform(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  Box random_box() {
    const double w = 0.05 + 0.45 * uniform01(), h = 0.05 + 0.45 * uniform01();
    const double xc = w / 2 + (1.0 - w) * uniform01(), yc = h / 2 + (1.0 - h) * uniform01();
    return Box{xc, yc, h, w};
  }

  MultimodalExample example(bool relevant) {
    MultimodalExample ex;
    auto& s = ex.sentence;
    const std::size_t m = uniform(cfg_.min_len, cfg_.max_len);
    while (s.labels.size() < m) {
      if (std::bernoulli_distribution(start_prob_)(rng_)) {
        const auto t = static_cast<EntityType>(uniform(0, kNumEntityTypes - 1));
        const std::size_t len = std::min(uniform(1, 3), m - s.labels.size());
        for (std::size_t k = 0; k < len; ++k) s.labels.push_back(k == 0 ? LabelSet::begin_of(t) : LabelSet::inside_of(t));
      } else {
        s.labels.push_back(0);
      }
    }
    std::vector<double> wf;
    std::vector<double> cls(cfg_.d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t lab = s.labels[i];
      const auto type = LabelSet::type(lab);
      s.tokens.push_back(type ? std::string(entity_type_name(*type)) + "_" + std::to_string(uniform(0, 99))
                              : "w" + std::to_string(uniform(0, 999)));
      const auto& shape = structure_proto_[lab == 0 ? 0 : (LabelSet::is_begin(lab) ? 1 : 2)];
      auto noise = gaussian(cfg_.d, cfg_.noise);
      for (std::size_t k = 0; k < cfg_.d; ++k) {
        double v = shape[k] + noise[k];
        if (type) v += cfg_.text_type_signal * type_proto_[static_cast<std::size_t>(*type)][k];
        wf.push_back(v);
        cls[k] += v / static_cast<double>(m);
      }
    }
    auto cls_noise = gaussian(cfg_.d, cfg_.noise);
    for (std::size_t k = 0; k < cfg_.d; ++k) cls[k] += cls_noise[k];
    s.word_feats = Tensor::from({m, cfg_.d}, std::move(wf));
    s.cls_feat = Tensor::from({cfg_.d}, std::move(cls));

    const auto spans = spans_from_bio2(s.labels);
    const std::size_t n_obj = uniform(cfg_.min_objects, cfg_.max_objects);
    std::vector<double> img = gaussian(cfg_.d_v, cfg_.noise);
    if (relevant) {
      for (const auto& sp : spans)
        for (std::size_t k = 0; k < cfg_.d_v; ++k) img[k] += image_type_proto_[static_cast<std::size_t>(sp.type)][k];
    }
    ex.image_feat = Tensor::from({cfg_.d_v}, std::move(img));
    for (std::size_t i = 0; i < n_obj; ++i) {
      ObjectDetection det;
      det.bbox = random_box();
      std::vector<double> feat = gaussian(cfg_.d_v, cfg_.noise);
      if (relevant && i < spans.size()) {
        const auto t = static_cast<std::size_t>(spans[i].type);
        det.concept_id = t;
        for (std::size_t k = 0; k < cfg_.d_v; ++k) feat[k] += object_type_proto_[t][k];
        det.score = 0.5 + 0.5 * uniform01();
      } else if (relevant) {
        det.concept_id = uniform(kNumEntityTypes, cfg_.concept_vocab - 1);
        det.score = 0.5 * uniform01();
      } else {
        det.concept_id = uniform(0, cfg_.concept_vocab - 1);
        det.score = uniform01();
      }
      det.feat = Tensor::from({cfg_.d_v}, std::move(feat));
      ex.objects.push_back(std::move(det));
    }
    std::stable_sort(ex.objects.begin(), ex.objects.end(),
                     [](const ObjectDetection& a, const ObjectDetection& b) { return a.score > b.score; });
    return ex;
  }

  const SyntheticConfig& cfg_;
  std::mt19937_64 rng_;
  std::array<std::vector<double>, 3> structure_proto_;  // O, B, I
  std::array<std::vector<double>, kNumEntityTypes> type_proto_;
  std::array<std::vector<double>, kNumEntityTypes> image_type_proto_;
  std::array<std::vector<double>, kNumEntityTypes> object_type_proto_;
  double start_prob_ = 0.0;
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.min_len == 0 || cfg.min_len > cfg.max_len || cfg.max_len > kMaxSentenceLength) {
    throw ConfigError("sentence length range is empty or exceeds " + std::to_string(kMaxSentenceLength));
  }
  if (cfg.min_objects > cfg.max_objects || cfg.max_objects > kMaxObjects) {
    throw ConfigError("object count range is empty or exceeds " + std::to_string(kMaxObjects));
  }
  if (cfg.d == 0 || cfg.d_v == 0 || cfg.n_sentences == 0) throw ConfigError("dimensions and counts must be positive");
  if (cfg.concept_vocab <= kNumEntityTypes) throw ConfigError("concept_vocab must exceed the number of entity types");
  if (cfg.relevance_rate < 0.0 || cfg.relevance_rate > 1.0) throw ConfigError("relevance_rate must be in [0,1]");
  if (!(cfg.entity_density >= 0.0 && cfg.entity_density < 1.0)) throw ConfigError("entity_density must be in [0,1)");

  SyntheticCorpus corpus;
  corpus.meta = DatasetMeta{cfg.d, cfg.d_v, cfg.concept_vocab,
                            std::vector<std::string>(kLabelNames.begin(), kLabelNames.end())};
  SyntheticGenerator gen(cfg);
  gen.fill(corpus.train, corpus.train_relevant, cfg.n_sentences);
  gen.fill(corpus.val, corpus.val_relevant, cfg.n_val);
  gen.fill(corpus.test, corpus.test_relevant, cfg.n_test);
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_meta(corpus.meta, dir / "meta.json");
  save_dataset(corpus.train, dir / "train.jsonl");
  save_dataset(corpus.val, dir / "val.jsonl");
  save_dataset(corpus.test, dir / "test.jsonl");
}

}  // namespace hamnet
