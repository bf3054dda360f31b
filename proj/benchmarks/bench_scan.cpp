#include <random>

#include <benchmark/benchmark.h>

#include "gesturegen/numeric/layers.hpp"
#include "gesturegen/ssm/scan.hpp"

using namespace gesturegen;

namespace {

ssm::SelectiveSsmParams make_params(std::size_t length, std::size_t channels, std::size_t state) {
  numeric::Rng rng(7);
  std::uniform_real_distribution<double> decay(0.5, 0.999), unit(-1, 1);
  ssm::SelectiveSsmParams p(length, channels, state);
  for (auto& v : p.abar) v = decay(rng);
  for (auto& v : p.bbar) v = unit(rng);
  for (auto& v : p.c) v = unit(rng);
  for (auto& v : p.d) v = unit(rng);
  return p;
}

void BM_ScanSequential(benchmark::State& state) {
  const auto L = static_cast<std::size_t>(state.range(0));
  const auto p = make_params(L, 32, 8);
  numeric::Rng rng(8);
  const auto u = numeric::gaussian({L, 32}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssm::selective_scan_seq(p, u));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(L));
}

void BM_ScanParallel(benchmark::State& state) {
  const auto L = static_cast<std::size_t>(state.range(0));
  const auto p = make_params(L, 32, 8);
  numeric::Rng rng(8);
  const auto u = numeric::gaussian({L, 32}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssm::selective_scan_parallel(p, u));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(L));
}

}  // namespace

BENCHMARK(BM_ScanSequential)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_ScanParallel)->RangeMultiplier(4)->Range(64, 4096);
