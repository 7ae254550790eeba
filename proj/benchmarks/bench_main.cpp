#include <benchmark/benchmark.h>

#include <random>

#include "hamnet/pipeline.hpp"

using namespace hamnet;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = g(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

TransitionTable random_table(std::mt19937_64& rng) {
  TransitionTable t = TransitionTable::zeros(kNumLabels);
  t.transitions = random_matrix(kNumLabels, kNumLabels, rng);
  return t;
}

void BM_CrfForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const EmissionTable e{random_matrix(static_cast<std::size_t>(state.range(0)), kNumLabels, rng)};
  const auto t = random_table(rng);
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(e, t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrfForward)->Arg(16)->Arg(64)->Arg(128);

void BM_Viterbi(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const EmissionTable e{random_matrix(static_cast<std::size_t>(state.range(0)), kNumLabels, rng)};
  const auto t = random_table(rng);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(e, t, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Arg(16)->Arg(64)->Arg(128);

void BM_BuildGraph(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::vector<ObjectDetection> dets(kMaxObjects);
  for (auto& o : dets) o.bbox = Box{u(rng), u(rng), 0.2, 0.2};
  const Tensor img = Tensor::zeros({32}), objs = Tensor::zeros({kMaxObjects, 32});
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(img, objs, dets));
}
BENCHMARK(BM_BuildGraph);

// Forward (and forward + backward) of the whole tagger at width d.
void run_pipeline(benchmark::State& state, bool backward) {
  const auto d = static_cast<std::size_t>(state.range(0));
  SyntheticConfig syn;
  syn.d = d;
  syn.n_sentences = 8;
  syn.min_len = syn.max_len = 16;
  syn.min_objects = syn.max_objects = 6;
  const auto corpus = generate_synthetic(syn);
  PipelineConfig cfg;
  cfg.d = d;
  cfg.heads = 4;
  cfg.vit_layers = 1;
  cfg.rgcn_layers = 1;
  cfg.interaction_rounds = static_cast<std::size_t>(state.range(1));
  cfg.dropout = 0.0;
  Model model(cfg, corpus.meta);
  const auto& ex = corpus.train.front();
  for (auto _ : state) {
    Tensor loss = model.loss(ex);
    if (backward) loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
  for (auto& p : model.named_params()) p.tensor.zero_grad();
}

void BM_ForwardPass(benchmark::State& state) { run_pipeline(state, false); }
void BM_TrainStep(benchmark::State& state) { run_pipeline(state, true); }
BENCHMARK(BM_ForwardPass)->Args({32, 1})->Args({32, 3})->Args({64, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Args({32, 1})->Args({64, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
