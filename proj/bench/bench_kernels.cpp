// Serial reference kernels against the OpenMP versions, plus the per-patch
// engineering and confusion-count hot paths.
//
//   OMP_NUM_THREADS=4 ./chansel_bench --benchmark_filter=Canny

#include <benchmark/benchmark.h>

#include <random>

#include "chansel/engineering.hpp"
#include "chansel/kernels.hpp"
#include "chansel/metrics.hpp"

using namespace chansel;

namespace {

Plane random_plane(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Plane p(n, n);
  for (auto& v : p.values) v = u(gen);
  return p;
}

template <Plane (*Fn)(const Plane&)>
void plane_kernel(benchmark::State& state) {
  const Plane p = random_plane(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}

template <kernels::Gradients (*Fn)(const Plane&)>
void gradient_kernel(benchmark::State& state) {
  const Plane p = random_plane(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}

void engineer_patch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<Plane> planes;
  for (int b = 1; b <= 14; ++b) planes.push_back(random_plane(n, 10 + b));
  const auto patch = RasterPatch::from_planes(engineering::raw_channels(), planes);
  for (auto _ : state) benchmark::DoNotOptimize(engineering::engineer_all(patch));
}

void sweep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> prob(n);
  std::vector<std::uint8_t> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = u(gen);
    truth[i] = gen() % 40 == 0;
  }
  const std::vector<PredictionView> views{{prob, truth}};
  for (auto _ : state) benchmark::DoNotOptimize(threshold_sweep(views));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(plane_kernel<kernels::reference::gaussian3x3>)->Name("Gaussian/serial")->Arg(128)->Arg(512);
BENCHMARK(plane_kernel<kernels::gaussian3x3>)->Name("Gaussian/omp")->Arg(128)->Arg(512);
BENCHMARK(plane_kernel<kernels::reference::median3x3>)->Name("Median/serial")->Arg(128)->Arg(512);
BENCHMARK(plane_kernel<kernels::median3x3>)->Name("Median/omp")->Arg(128)->Arg(512);
BENCHMARK(gradient_kernel<kernels::reference::sobel3x3>)->Name("Sobel/serial")->Arg(128)->Arg(512);
BENCHMARK(gradient_kernel<kernels::sobel3x3>)->Name("Sobel/omp")->Arg(128)->Arg(512);
BENCHMARK(plane_kernel<kernels::reference::canny>)->Name("Canny/serial")->Arg(128)->Arg(512);
BENCHMARK(plane_kernel<kernels::canny>)->Name("Canny/omp")->Arg(128)->Arg(512);
BENCHMARK(engineer_patch)->Name("EngineerPatch")->Arg(128);
BENCHMARK(sweep)->Name("ThresholdSweep")->Arg(1 << 20);

BENCHMARK_MAIN();
