#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamnet/errors.hpp"
#include "hamnet/data.hpp"
#include "helpers.hpp"

using namespace hamnet;
using nlohmann::json;

namespace {

const DatasetMeta kMeta = testing::make_meta(3, 2, 5);

json object_json(double score, std::size_t concept_id = 1, std::vector<double> bbox = {0.5, 0.5, 0.2, 0.2}) {
  return {{"bbox", bbox}, {"feat", {score, -score}}, {"concept_id", concept_id}, {"score", score}};
}

json line_json(std::vector<std::string> labels) {
  json j;
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> words;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    tokens.push_back("tok" + std::to_string(i));
    words.push_back({0.1 * i, 1.0, -1.0});
  }
  j["tokens"] = tokens;
  j["labels"] = labels;
  j["cls_feat"] = {1.0, 2.0, 3.0};
  j["word_feats"] = words;
  j["image_feat"] = {0.5, 0.25};
  j["objects"] = {object_json(0.9)};
  return j;
}

void write_lines(const std::filesystem::path& p, const std::vector<json>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l.dump() << '\n';
}

std::vector<std::size_t> idx(std::initializer_list<const char*> names) {
  std::vector<std::size_t> out;
  for (auto n : names) out.push_back(LabelSet::index(n));
  return out;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("label set is the canonical BIO2 order") {
  const auto& names = LabelSet::names();
  REQUIRE(names.size() == 9);
  CHECK(names[0] == "O");
  CHECK(names[1] == "B-PER");
  CHECK(names[2] == "I-PER");
  CHECK(names[7] == "B-MISC");
  CHECK(names[8] == "I-MISC");
  for (std::size_t i = 0; i < 9; ++i) CHECK(LabelSet::index(names[i]) == i);
  CHECK_THROWS_AS(LabelSet::index("B-FOO"), DataError);
}

TEST_CASE("a well-formed two-line file loads two examples") {
  testing::TempDir dir("data");
  write_lines(dir / "d.jsonl", {line_json({"B-PER", "I-PER", "O"}), line_json({"O"})});
  const Dataset ds = load_dataset(dir / "d.jsonl", kMeta);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].sentence.length() == 3);
  CHECK(ds[0].sentence.labels == idx({"B-PER", "I-PER", "O"}));
  CHECK(ds[0].sentence.word_feats.shape() == Shape{3, 3});
  CHECK(ds[1].objects.size() == 1);
  CHECK(ds[1].objects[0].bbox == Box{0.5, 0.5, 0.2, 0.2});
}

TEST_CASE("labels of the wrong length are reported with the line number") {
  testing::TempDir dir("data");
  json bad = line_json({"O", "O"});
  bad["labels"] = {"O"};
  write_lines(dir / "d.jsonl", {line_json({"O"}), bad});
  CHECK_THROWS_WITH_AS(load_dataset(dir / "d.jsonl", kMeta), doctest::Contains("line 2: field 'labels'"), DataError);
}

TEST_CASE("twenty detections keep the fifteen highest scores in descending order") {
  testing::TempDir dir("data");
  json j = line_json({"O"});
  j["objects"] = json::array();
  // scores 0.01 .. 0.20 in a shuffled order
  std::vector<int> order(20);
  for (int i = 0; i < 20; ++i) order[i] = (i * 7) % 20;
  for (int k : order) j["objects"].push_back(object_json(0.01 * (k + 1)));
  write_lines(dir / "d.jsonl", {j});
  const Dataset ds = load_dataset(dir / "d.jsonl", kMeta);
  REQUIRE(ds[0].objects.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) CHECK(ds[0].objects[i].score == doctest::Approx(0.01 * (20 - i)));
  // features travel with their detection
  CHECK(ds[0].objects[0].feat[0] == ds[0].objects[0].score);
}

TEST_CASE("schema violations name the line and field") {
  struct Bad {
    const char* field;
    std::function<void(json&)> mutate;
  };
  const std::vector<Bad> cases = {
      {"tokens", [](json& j) { j.erase("tokens"); }},
      {"cls_feat", [](json& j) { j["cls_feat"] = {1.0, 2.0}; }},
      {"word_feats", [](json& j) { j["word_feats"] = json::array(); }},
      {"image_feat", [](json& j) { j["image_feat"] = {1.0, 2.0, 3.0}; }},
      {"objects[0].concept_id", [](json& j) { j["objects"][0]["concept_id"] = 5; }},
      {"objects[0].score", [](json& j) { j["objects"][0]["score"] = 1.5; }},
      {"objects[0].bbox", [](json& j) { j["objects"][0]["bbox"] = {0.5, 0.5, 0.0, 0.2}; }},
      {"objects[0].feat", [](json& j) { j["objects"][0]["feat"] = {1.0}; }},
      {"labels", [](json& j) { j["labels"][0] = "B-XYZ"; }},
  };
  for (const auto& c : cases) {
    CAPTURE(std::string(c.field));
    json j = line_json({"O", "O"});
    c.mutate(j);
    const std::string expected = "line 4: field '" + std::string(c.field) + "'";
    CHECK_THROWS_WITH_AS(parse_example(j.dump(), kMeta, 4), doctest::Contains(expected.c_str()), DataError);
  }
  CHECK_THROWS_WITH_AS(parse_example("{not json", kMeta, 9), doctest::Contains("line 9"), DataError);
}

TEST_CASE("sentences longer than the limit are rejected") {
  std::vector<std::string> labels(129, "O");
  CHECK_THROWS_AS(parse_example(line_json(labels).dump(), kMeta, 1), DataError);
  labels.resize(128);
  CHECK_NOTHROW(parse_example(line_json(labels).dump(), kMeta, 1));
  CHECK_THROWS_AS(parse_example(line_json({}).dump(), kMeta, 1), DataError);
}

TEST_CASE("boxes slightly outside the image are clamped") {
  json j = line_json({"O"});
  j["objects"][0]["bbox"] = {0.95, 0.5, 0.2, 0.2};  // spills over x = 1
  const auto ex = parse_example(j.dump(), kMeta, 1);
  const Box& b = ex.objects[0].bbox;
  CHECK(b.x1() <= 1.0 + 1e-12);
  CHECK(b.x0() == doctest::Approx(0.85));
  CHECK(b.w > 0.0);
}

TEST_CASE("stray inside tags are repaired to begin tags") {
  const auto raw = idx({"I-LOC", "O", "B-PER", "I-ORG"});
  CHECK(repair_bio2(raw) == idx({"B-LOC", "O", "B-PER", "B-ORG"}));
  json j = line_json({"I-PER", "I-PER"});
  CHECK(parse_example(j.dump(), kMeta, 1).sentence.labels == idx({"B-PER", "I-PER"}));
}

TEST_CASE("spans from BIO2") {
  CHECK(spans_from_bio2(idx({"B-PER", "I-PER", "O"})) == std::vector<Span>{{0, 2, EntityType::PER}});
  CHECK(spans_from_bio2(idx({"O", "O", "O"})).empty());
  const std::vector<Span> expect{{0, 1, EntityType::LOC}, {1, 2, EntityType::ORG}, {2, 3, EntityType::PER}};
  CHECK(spans_from_bio2(idx({"I-LOC", "B-ORG", "I-PER"})) == expect);
}

TEST_CASE("span re-encoding reproduces the repaired sequence") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> lab(0, 8), len(1, 20);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> labels(len(rng));
    for (auto& l : labels) l = lab(rng);
    const auto spans = spans_from_bio2(labels);
    CHECK(bio2_from_spans(spans, labels.size()) == repair_bio2(labels));
  }
}

TEST_CASE("entity F1 conventions and hand-counted values") {
  const std::vector<Span> a{{0, 2, EntityType::PER}, {3, 4, EntityType::LOC}};
  auto s = entity_f1({a}, {a});
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);

  s = entity_f1({{}}, {a});
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);

  s = entity_f1({{{0, 2, EntityType::PER}}}, {a});
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.per_type_f1.at(EntityType::PER) == 1.0);
  CHECK(s.per_type_f1.at(EntityType::LOC) == 0.0);

  // boundary or type mismatches do not count
  s = entity_f1({{{0, 1, EntityType::PER}, {3, 4, EntityType::ORG}}}, {a});
  CHECK(s.true_positives == 0);
  CHECK_THROWS_AS(entity_f1({{}, {}}, {{}}), DataError);
}

TEST_CASE("entity F1 of any nonempty span set against itself is one") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> lab(0, 8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<Span>> sets;
    for (int s = 0; s < 3; ++s) {
      std::vector<std::size_t> labels(10);
      for (auto& l : labels) l = lab(rng);
      sets.push_back(spans_from_bio2(labels));
    }
    sets[0].push_back({9, 10, EntityType::MISC});
    const auto sc = entity_f1(sets, sets);
    CHECK(sc.precision == 1.0);
    CHECK(sc.recall == 1.0);
    CHECK(sc.f1 == 1.0);
  }
}

TEST_CASE("load(save(dataset)) == dataset") {
  testing::TempDir dir("data");
  SyntheticConfig cfg;
  cfg.n_sentences = 12;
  cfg.max_objects = 7;
  const auto corpus = generate_synthetic(cfg);
  save_dataset(corpus.train, dir / "t.jsonl");
  save_meta(corpus.meta, dir / "meta.json");
  const DatasetMeta meta = load_meta(dir / "meta.json");
  CHECK(meta == corpus.meta);
  const Dataset back = load_dataset(dir / "t.jsonl", meta);
  REQUIRE(back.size() == corpus.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == corpus.train[i]);
}

TEST_CASE("meta validation") {
  testing::TempDir dir("data");
  std::ofstream(dir / "m1.json") << R"({"d":4,"d_v":2,"concept_vocab":3,"label_set":["O","B-PER"]})";
  CHECK_THROWS_AS(load_meta(dir / "m1.json"), DataError);
  std::ofstream(dir / "m2.json") << R"({"d":0,"d_v":2,"concept_vocab":3})";
  CHECK_THROWS_AS(load_meta(dir / "m2.json"), DataError);
  CHECK_THROWS_AS(load_meta(dir / "missing.json"), DataError);
}

TEST_CASE("dimension mismatch against meta is an error") {
  const DatasetMeta wider = testing::make_meta(4, 2, 5);
  CHECK_THROWS_WITH_AS(parse_example(line_json({"O"}).dump(), wider, 1), doctest::Contains("cls_feat"), DataError);
}

TEST_CASE("synthetic generation is deterministic") {
  testing::TempDir a("gen"), b("gen");
  SyntheticConfig cfg;
  write_synthetic(generate_synthetic(cfg), a.path());
  write_synthetic(generate_synthetic(cfg), b.path());
  for (const char* f : {"meta.json", "train.jsonl", "val.jsonl", "test.jsonl"}) {
    std::ifstream fa(a / f), fb(b / f);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str().size() > 0);
    CHECK(sa.str() == sb.str());
  }
  // written files load through the validating loader
  const DatasetMeta meta = load_meta(a / "meta.json");
  CHECK(load_dataset(a / "train.jsonl", meta).size() == cfg.n_sentences);
}

TEST_CASE("relevance_rate = 0 draws every visual feature from the noise distribution") {
  SyntheticConfig cfg;
  cfg.relevance_rate = 0.0;
  cfg.n_sentences = 200;
  cfg.min_objects = 2;
  const auto corpus = generate_synthetic(cfg);
  for (bool r : corpus.train_relevant) CHECK_FALSE(r);
  // pooled moments match N(0, noise²)
  double s = 0, ss = 0;
  std::size_t n = 0;
  for (const auto& ex : corpus.train) {
    for (double v : ex.image_feat.values()) s += v, ss += v * v, ++n;
    for (const auto& o : ex.objects)
      for (double v : o.feat.values()) s += v, ss += v * v, ++n;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(cfg.noise * cfg.noise).epsilon(0.05));
}

TEST_CASE("seed 7 corpus label marginals track the configured entity density") {
  SyntheticConfig cfg;  // seed 7, 32 sentences
  const auto corpus = generate_synthetic(cfg);
  std::size_t entity = 0, total = 0;
  for (const auto& ex : corpus.train)
    for (auto l : ex.sentence.labels) entity += l != 0, ++total;
  const double frac = static_cast<double>(entity) / static_cast<double>(total);
  CAPTURE(frac);
  CHECK(frac >= 0.8 * cfg.entity_density);
  CHECK(frac <= 1.2 * cfg.entity_density);
}

TEST_CASE("impossible generator ranges are configuration errors") {
  SyntheticConfig cfg;
  cfg.min_len = 5;
  cfg.max_len = 4;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.max_len = 200;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.min_objects = 3;
  cfg.max_objects = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.concept_vocab = 4;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg = {};
  cfg.relevance_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

}  // TEST_SUITE
