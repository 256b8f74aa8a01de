#include "efbm/density.hpp"
#include "efbm/kernel.hpp"
#include "efbm/kernel_table.hpp"
#include "efbm/malliavin.hpp"
#include "efbm/paths.hpp"
#include "efbm/rng.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace efbm;

static void BM_KernelEval(benchmark::State& state) {
  const VolterraKernel k(0.7);
  double s = 0.001;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k(1.0, s));
    s = s < 0.999 ? s + 0.001 : 0.001;
  }
}
BENCHMARK(BM_KernelEval);

static void BM_CalibrateCh(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_ch(0.7));
}
BENCHMARK(BM_CalibrateCh)->Unit(benchmark::kMillisecond);

static void BM_BuildTable(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_kernel_table(0.7, 1.0, n));
}
BENCHMARK(BM_BuildTable)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_NormalStream(benchmark::State& state) {
  RandomStream s(1, StreamPurpose::test, 0);
  std::vector<double> buf(4096);
  for (auto _ : state) {
    s.fill_normal(buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(buf.size()));
}
BENCHMARK(BM_NormalStream);

static void BM_PathBlock(benchmark::State& state) {
  const auto table = build_kernel_table(0.7, 1.0, static_cast<std::size_t>(state.range(0)));
  PathBlock block;
  std::uint64_t first = 0;
  for (auto _ : state) {
    generate_path_block(table, 1, StreamPurpose::increments, first, kPathBlock, block);
    first += kPathBlock;
    benchmark::DoNotOptimize(block.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPathBlock));
}
BENCHMARK(BM_PathBlock)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_CholeskyPath(benchmark::State& state) {
  const auto grid = uniform_grid(1.0, 256);
  const CholeskySampler chol(0.7, grid);
  std::uint64_t p = 0;
  for (auto _ : state) benchmark::DoNotOptimize(chol.sample({1, StreamPurpose::cholesky, p++, 0}));
}
BENCHMARK(BM_CholeskyPath);

static void BM_ConditionalDX(benchmark::State& state) {
  const auto table = build_kernel_table(0.7, 1.0, 64);
  const auto path = sample_fbm_volterra(table, {1, StreamPurpose::increments, 0, 0});
  const ModelParams params;
  for (auto _ : state) benchmark::DoNotOptimize(conditional_dX(path, table, params, 0.25, {200, 4, 1}));
}
BENCHMARK(BM_ConditionalDX)->Unit(benchmark::kMicrosecond);

static void BM_MalliavinProfile(benchmark::State& state) {
  const auto table = build_kernel_table(0.7, 1.0, 64);
  const auto path = sample_fbm_volterra(table, {1, StreamPurpose::increments, 0, 0});
  const ModelParams params;
  for (auto _ : state) benchmark::DoNotOptimize(malliavin_profile(path, table, params, {200, 4, 1}, true));
}
BENCHMARK(BM_MalliavinProfile)->Unit(benchmark::kMillisecond);

static void BM_Kde(benchmark::State& state) {
  RandomStream s(1, StreamPurpose::synthetic, 0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  s.fill_normal(x);
  for (auto _ : state) benchmark::DoNotOptimize(kde_log_domain(x, 0.0, {std::nullopt, 1024, 20, 1, 50}));
}
BENCHMARK(BM_Kde)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
