// SPDX-License-Identifier: Apache-2.0
#include "nrfe/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

static void BM_ComputeMetrics(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<nrfe::BinaryLabel> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = coin(rng) ? nrfe::BinaryLabel::Fake : nrfe::BinaryLabel::Real;
    truth[i] = coin(rng) ? nrfe::BinaryLabel::Fake : nrfe::BinaryLabel::Real;
  }
  for (auto _ : state) benchmark::DoNotOptimize(nrfe::compute_metrics(pred, truth).mac_f1);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeMetrics)->Range(64, 1 << 16);
BENCHMARK_MAIN();
