#include <benchmark/benchmark.h>

#include "bhmm/em.hpp"
#include "bhmm/feature_map.hpp"
#include "bhmm/ftd.hpp"
#include "bhmm/moments.hpp"
#include "bhmm/synth.hpp"

using namespace bhmm;

namespace {

Sequence synthetic(std::size_t length) {
  SynthConfig cfg;
  return sample_sequence(generate_params(cfg, 11), length, cfg.coverage_mean, 12);
}

void BM_BetaMapRows(benchmark::State& state) {
  const auto c = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beta_map_rows(c, 30));
  state.SetItemsProcessed(state.iterations() * (c + 1));
}
BENCHMARK(BM_BetaMapRows)->Arg(25)->Arg(200)->Arg(1000);

void BM_DenseMoments(benchmark::State& state) {
  const auto seq = synthetic(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    BetaMapTable table(BetaMapConfig{30});
    benchmark::DoNotOptimize(estimate_moments(seq, table));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DenseMoments)->Arg(8192)->Arg(65536)->Unit(benchmark::kMillisecond);

void BM_PairMoments(benchmark::State& state) {
  const auto seq = synthetic(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    BetaMapTable table(BetaMapConfig{30});
    benchmark::DoNotOptimize(pair_moments(index_sequence(seq, table)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PairMoments)->Arg(8192)->Arg(65536)->Unit(benchmark::kMillisecond);

void BM_FitFtd(benchmark::State& state) {
  const auto seq = synthetic(static_cast<std::size_t>(state.range(0)));
  FtdConfig cfg;
  cfg.dense_moments = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(fit_ftd(seq, cfg));
}
BENCHMARK(BM_FitFtd)
    ->Args({8192, 0})
    ->Args({8192, 1})
    ->Args({65536, 0})
    ->ArgNames({"length", "dense"})
    ->Unit(benchmark::kMillisecond);

void BM_EmFit(benchmark::State& state) {
  const auto seq = synthetic(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(em_fit(seq, 4, EmConfig{}));
}
BENCHMARK(BM_EmFit)->Arg(8192)->Arg(65536)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
