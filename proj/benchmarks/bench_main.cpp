#include <benchmark/benchmark.h>

#include <random>

#include "mgembed/eval.hpp"
#include "mgembed/mgda.hpp"
#include "mgembed/objective.hpp"
#include "mgembed/synth.hpp"
#include "mgembed/trainer.hpp"

using namespace mgembed;

namespace {

MultiGraph bench_graph(Index n) {
  SbmConfig c;
  c.n = n;
  c.blocks = 4;
  c.p_in = std::min(1.0, 20.0 / static_cast<double>(n));
  c.p_out = 1.0 / static_cast<double>(n);
  c.seed = 1;
  return make_sbm2(c);
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng);
  return m;
}

void BM_Forward(benchmark::State& state) {
  const auto g = bench_graph(state.range(0));
  const auto ops = GraphOperators::from_graph(g);
  const auto x0 = FeatureMatrix::identity(g.n_nodes());
  const auto p = init_params(LayerDims{g.n_nodes(), 64, 16}, 2, 0);
  for (auto _ : state) benchmark::DoNotOptimize(forward_pass(ops, x0, p));
}
BENCHMARK(BM_Forward)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const auto g = bench_graph(state.range(0));
  const auto ops = GraphOperators::from_graph(g);
  const auto x0 = FeatureMatrix::identity(g.n_nodes());
  const auto p = init_params(LayerDims{g.n_nodes(), 64, 16}, 2, 0);
  const auto pass = forward_pass(ops, x0, p);
  Rng rng(1);
  const auto batch = sample_batch(g, 0, 256, 2, rng);
  for (auto _ : state) benchmark::DoNotOptimize(backward(batch, ops, x0, p, pass, nullptr));
}
BENCHMARK(BM_Backward)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FrankWolfe(benchmark::State& state) {
  std::vector<Matrix> grads;
  for (int d = 0; d < state.range(0); ++d) grads.push_back(random_matrix(2000, 64, static_cast<std::uint64_t>(d)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_alpha_fw(grads));
}
BENCHMARK(BM_FrankWolfe)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_RankItems(benchmark::State& state) {
  const Matrix items = random_matrix(state.range(0), 16, 3);
  const Vector user = random_matrix(1, 16, 4).row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(rank_items(user, items, 100));
}
BENCHMARK(BM_RankItems)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto g = bench_graph(state.range(0));
  TrainConfig cfg;
  cfg.epochs = 1000000;
  Trainer t(g, cfg);
  for (auto _ : state) t.run_epoch();
}
BENCHMARK(BM_TrainEpoch)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
