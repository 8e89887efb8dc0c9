#include <benchmark/benchmark.h>

#include "dpca/imaging.hpp"
#include "dpca/linalg.hpp"
#include "dpca/rng.hpp"
#include "dpca/solvers.hpp"
#include "dpca/surrogates.hpp"
#include "dpca/synth.hpp"
#include "dpca/thresholding.hpp"

namespace {

dpca::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dpca::Rng rng(seed);
  dpca::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_TruncatedSvd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const dpca::Matrix x = random_matrix(n, 2 * n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dpca::truncated_svd(x, 8));
}
BENCHMARK(BM_TruncatedSvd)->Arg(64)->Arg(240);

void BM_SoftAdaptive(benchmark::State& state) {
  const dpca::Matrix m = random_matrix(1, 4900, 2);
  const std::vector<double> y(m.data().begin(), m.data().end());
  for (auto _ : state) {
    auto copy = y;
    dpca::soft_adaptive_inplace(copy, 2.0);
    benchmark::DoNotOptimize(copy.data());
  }
}
BENCHMARK(BM_SoftAdaptive);

void BM_SynthFit(benchmark::State& state) {
  const auto solver = static_cast<dpca::Solver>(state.range(0));
  dpca::SynthConfig sc = dpca::SynthConfig::preset(dpca::OverlapPreset::moderate);
  const dpca::Matrix xc = dpca::center_columns(dpca::generate_scene(sc).X).matrix;
  const dpca::SvdFactors svd = dpca::truncated_svd(xc, 8);
  dpca::DpcaConfig cfg;
  cfg.lambda = 0.67;
  cfg.scale_lambda = true;
  cfg.firm = dpca::FirmThresholds(0.12, 0.24);
  for (auto _ : state) benchmark::DoNotOptimize(dpca::fit(solver, xc, svd, cfg));
  state.SetLabel(std::string(dpca::to_string(solver)));
}
BENCHMARK(BM_SynthFit)
    ->Arg(static_cast<int>(dpca::Solver::pca))
    ->Arg(static_cast<int>(dpca::Solver::dpca1a))
    ->Arg(static_cast<int>(dpca::Solver::dpca1b))
    ->Arg(static_cast<int>(dpca::Solver::dpca2))
    ->Unit(benchmark::kMillisecond);

void BM_OmpMasked(benchmark::State& state) {
  const dpca::Matrix dict = random_matrix(64, 65, 3);
  const dpca::Matrix b = random_matrix(1, 64, 4);
  std::vector<bool> known(64, true);
  for (std::size_t i = 0; i < 64; i += 7) known[i] = false;
  for (auto _ : state) benchmark::DoNotOptimize(dpca::omp_masked(b.data(), known, dict, 20));
}
BENCHMARK(BM_OmpMasked);

}  // namespace
BENCHMARK_MAIN();
