#include <doctest.h>

#include <cmath>
#include <random>

#include "hamnet/errors.hpp"
#include "hamnet/gradcheck.hpp"
#include "hamnet/relevance.hpp"
#include "helpers.hpp"

using namespace hamnet;
using testing::random_tensor;

namespace {

RelevanceParams zeroed(std::size_t d, RelevanceVariant variant = RelevanceVariant::Vector) {
  Initializer init(1);
  auto p = RelevanceParams::make(d, variant, init);
  for (auto t : testing::params_of(p)) testing::fill(t.tensor, 0.0);
  return p;
}

std::vector<double> identity(std::size_t d, double s = 1.0) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = s;
  return v;
}

}  // namespace

TEST_SUITE("relevance") {

TEST_CASE("zero weights give zero relevance") {
  std::mt19937_64 rng(1);
  const auto p = zeroed(5);
  const Tensor m = relevance_score(random_tensor({5}, rng), random_tensor({5}, rng), p);
  REQUIRE(m.shape() == Shape{5});
  for (double v : m.values()) CHECK(v == 0.0);
}

TEST_CASE("identity text projection without bilinear term gives tanh(h)") {
  std::mt19937_64 rng(2);
  auto p = zeroed(4);
  testing::set_values(p.text_proj.weight, identity(4));
  const Tensor h = random_tensor({4}, rng, 2.0);
  const Tensor m = relevance_score(h, random_tensor({4}, rng), p);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m[i] == doctest::Approx(std::tanh(h[i])).epsilon(1e-15));
}

TEST_CASE("hand-computed relevance at d = 3") {
  auto p = zeroed(3);
  testing::set_values(p.bilinear, identity(3));
  testing::set_values(p.text_proj.weight, {1, 0, 0, 0, 2, 0, 0, 0, 3});
  testing::set_values(p.image_proj.weight, identity(3));
  const Tensor h = Tensor::from({3}, {1, 0, -1}), v = Tensor::from({3}, {0.5, 1, 2});
  const double c = std::tanh(0.5 - 2.0);
  const std::vector<double> expect{std::tanh(1 + 0.5 * c), std::tanh(0 + 1 * c), std::tanh(-3 + 2 * c)};
  const Tensor m = relevance_score(h, v, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(m[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("relevance stays inside (-1, 1)") {
  Initializer init(9);
  const auto p = RelevanceParams::make(6, RelevanceVariant::Vector, init);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Tensor m = relevance_score(random_tensor({6}, rng, 3.0), random_tensor({6}, rng, 3.0), p);
    for (double v : m.values()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("zero relevance makes rows depend on the objects only") {
  Initializer init(4);
  const auto p = RelevanceParams::make(4, RelevanceVariant::Vector, init);
  std::mt19937_64 rng(4);
  const Tensor objs = random_tensor({3, 4}, rng);
  const Tensor m = Tensor::zeros({4});
  const Tensor a = fuse_local_global(m, random_tensor({4}, rng), objs, p);
  const Tensor b = fuse_local_global(m, random_tensor({4}, rng, 10.0), objs, p);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == b.values()[i]);
  // and the row is just the object half of the fusion map
  const Tensor direct = p.fuse(concat_cols(Tensor::zeros({3, 4}), objs));
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == direct.values()[i]);
}

TEST_CASE("no objects gives an empty fused matrix") {
  Initializer init(4);
  const auto p = RelevanceParams::make(4, RelevanceVariant::Vector, init);
  std::mt19937_64 rng(5);
  const auto out = measure_relevance(random_tensor({4}, rng), random_tensor({4}, rng), Tensor::zeros({0, 4}), p);
  CHECK(out.fused.shape() == Shape{0, 4});
  CHECK(out.relevance.shape() == Shape{4});
}

TEST_CASE("hand-computed fusion for one object at d = 2") {
  auto p = zeroed(2);
  testing::set_values(p.fuse.weight, {1, 0, 0, 1, 0, 1, 1, 0});
  testing::set_values(p.fuse.bias, {0.1, -0.1});
  const Tensor m = Tensor::from({2}, {0.5, -0.5}), v = Tensor::from({2}, {2, 4}), obj = Tensor::from({1, 2}, {1, 3});
  // global = [1, -2]; row = [1, -2, 1, 3]
  const Tensor out = fuse_local_global(m, v, obj, p);
  CHECK(out.at(0, 0) == doctest::Approx(4.1).epsilon(1e-15));
  CHECK(out.at(0, 1) == doctest::Approx(-1.1).epsilon(1e-15));
}

TEST_CASE("shape errors") {
  const auto p = zeroed(3);
  CHECK_THROWS_AS(relevance_score(Tensor::zeros({4}), Tensor::zeros({3}), p), ShapeError);
  CHECK_THROWS_AS(relevance_score(Tensor::zeros({1, 3}), Tensor::zeros({3}), p), ShapeError);
  CHECK_THROWS_AS(fuse_local_global(Tensor::zeros({3}), Tensor::zeros({3}), Tensor::zeros({2, 4}), p), ShapeError);
  CHECK_THROWS_AS(fuse_local_global(Tensor::zeros({2}), Tensor::zeros({3}), Tensor::zeros({2, 3}), p), ShapeError);
}

TEST_CASE("scalar variant broadcasts one value") {
  Initializer init(6);
  const auto p = RelevanceParams::make(5, RelevanceVariant::Scalar, init);
  CHECK(p.text_proj.out_features() == 1);
  std::mt19937_64 rng(6);
  const Tensor m = relevance_score(random_tensor({5}, rng), random_tensor({5}, rng), p);
  REQUIRE(m.shape() == Shape{5});
  for (std::size_t i = 1; i < 5; ++i) CHECK(m[i] == m[0]);
}

TEST_CASE("trace records one relevance vector per call") {
  Initializer init(6);
  const auto p = RelevanceParams::make(3, RelevanceVariant::Vector, init);
  std::mt19937_64 rng(7);
  ForwardTrace trace;
  const auto out = measure_relevance(random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({2, 3}, rng), p,
                                     {false, 0.0, nullptr, &trace});
  REQUIRE(trace.relevance.size() == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(trace.relevance[0][i] == out.relevance[i]);
}

TEST_CASE("relevance gradients match finite differences") {
  Initializer init(8);
  auto p = RelevanceParams::make(4, RelevanceVariant::Vector, init);
  std::mt19937_64 rng(8);
  testing::randomize(testing::params_of(p), rng);
  Tensor h = random_tensor({4}, rng, 1.0, true), v = random_tensor({4}, rng, 1.0, true);
  Tensor objs = random_tensor({3, 4}, rng, 1.0, true);
  auto params = testing::params_of(p);
  params.push_back({"h", h});
  params.push_back({"v", v});
  params.push_back({"objs", objs});
  const auto r = check_gradients(
      [&] {
        const auto out = measure_relevance(h, v, objs, p);
        return sum(mul(out.fused, out.fused));
      },
      params);
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_error < 1e-6);
}

}  // TEST_SUITE
