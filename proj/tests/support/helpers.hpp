#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hamnet/data.hpp"
#include "hamnet/nn.hpp"
#include "hamnet/tensor.hpp"

namespace testing {

inline hamnet::Tensor random_tensor(hamnet::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                    bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(hamnet::shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return hamnet::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline void fill(hamnet::Tensor& t, double value) {
  for (double& x : t.mutable_values()) x = value;
}

inline void set_values(hamnet::Tensor& t, const std::vector<double>& values) {
  auto dst = t.mutable_values();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] = values[i];
}

// Example with M tokens, N objects at random boxes and random features.
inline hamnet::MultimodalExample make_example(std::size_t m, std::size_t n, std::size_t d, std::size_t d_v,
                                              std::size_t concept_vocab, std::mt19937_64& rng,
                                              std::vector<std::size_t> labels = {}) {
  hamnet::MultimodalExample ex;
  for (std::size_t i = 0; i < m; ++i) ex.sentence.tokens.push_back("t" + std::to_string(i));
  if (labels.empty()) labels.assign(m, 0);
  ex.sentence.labels = labels;
  ex.sentence.word_feats = random_tensor({m, d}, rng);
  ex.sentence.cls_feat = random_tensor({d}, rng);
  ex.image_feat = random_tensor({d_v}, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    hamnet::ObjectDetection o;
    const double w = 0.1 + 0.3 * u(rng), h = 0.1 + 0.3 * u(rng);
    o.bbox = {w / 2 + (1 - w) * u(rng), h / 2 + (1 - h) * u(rng), h, w};
    o.feat = random_tensor({d_v}, rng);
    o.concept_id = k % concept_vocab;
    o.score = 1.0 - 0.1 * static_cast<double>(k);
    ex.objects.push_back(o);
  }
  return ex;
}

inline hamnet::DatasetMeta make_meta(std::size_t d, std::size_t d_v, std::size_t concept_vocab) {
  hamnet::DatasetMeta meta{d, d_v, concept_vocab, {}};
  for (auto name : hamnet::LabelSet::names()) meta.label_set.emplace_back(name);
  return meta;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hamnet_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

namespace testing {

// Overwrites every parameter with N(0, scale²) draws (biases and norms too),
// so reference comparisons exercise every term.
inline void randomize(const hamnet::ParamList& params, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> dist(0.0, scale);
  for (const auto& p : params) {
    hamnet::Tensor t = p.tensor;
    for (double& x : t.mutable_values()) x = dist(rng);
  }
}

template <typename P>
hamnet::ParamList params_of(const P& p) {
  hamnet::ParamList out;
  p.collect("p", out);
  return out;
}

}  // namespace testing
