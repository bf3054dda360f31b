#include <benchmark/benchmark.h>

#include "gesturegen/denoiser/mambattn.hpp"

using namespace gesturegen;

namespace {

// Forward and forward+backward through the toy-sized stack; range(0) is the
// frame count, range(1) toggles attention.
void run(benchmark::State& state, bool backward) {
  denoiser::DenoiserConfig cfg;
  cfg.layers = 8;
  cfg.d = 32;
  cfg.gesture_dim = 75;
  cfg.use_attention = state.range(1) != 0;
  denoiser::Denoiser model = denoiser::build_variant(cfg, 3);
  numeric::Rng rng(4);
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto f = numeric::gaussian({frames, cfg.d}, 1.0, rng);
  const auto dy = numeric::gaussian({frames, cfg.gesture_dim}, 1.0, rng);
  for (auto _ : state) {
    denoiser::Denoiser::Cache cache;
    auto y = denoiser::denoiser_forward(model, f, 10, backward ? &cache : nullptr);
    if (backward) benchmark::DoNotOptimize(denoiser::denoiser_backward(model, cache, dy));
    benchmark::DoNotOptimize(y);
  }
}

void BM_DenoiserForward(benchmark::State& state) { run(state, false); }
void BM_DenoiserForwardBackward(benchmark::State& state) { run(state, true); }

}  // namespace

BENCHMARK(BM_DenoiserForward)->ArgsProduct({{60, 240}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenoiserForwardBackward)->ArgsProduct({{60, 240}, {0, 1}})->Unit(benchmark::kMillisecond);
