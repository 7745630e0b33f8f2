#include <benchmark/benchmark.h>

#include "cmcflow/diagnostics.hpp"
#include "cmcflow/energy.hpp"
#include "cmcflow/flow.hpp"
#include "cmcflow/ply.hpp"

#include <numbers>

using namespace cmcflow;

namespace {

std::shared_ptr<MetricModel> metric() {
  static std::shared_ptr<MetricModel> g = round_s3();
  return g;
}

void bm_mesh_assembly(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_icosphere(level));
  }
}
BENCHMARK(bm_mesh_assembly)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void bm_gradient(benchmark::State& state) {
  const auto& m = cached_icosphere(static_cast<int>(state.range(0)));
  const MapField u = geodesic_sphere_map(m, metric(), 0.9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(u, 1.0, 0.05));
  }
}
BENCHMARK(bm_gradient)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void bm_volume_increment(benchmark::State& state) {
  const auto& m = cached_icosphere(static_cast<int>(state.range(0)));
  const MapField a = latitude_map(m, metric(), -0.05);
  const MapField b = latitude_map(m, metric(), 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(volume_increment(a, b));
  }
}
BENCHMARK(bm_volume_increment)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void bm_precond_solve(benchmark::State& state) {
  const auto& m = cached_icosphere(static_cast<int>(state.range(0)));
  const MapField u = geodesic_sphere_map(m, metric(), 0.9);
  const StepSolver solver(m, 0.05, Preconditioner::SobolevH2);
  const Gradient g = gradient(u, 1.0, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.solve(g.tangent));
  }
}
BENCHMARK(bm_precond_solve)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void bm_hessian_apply(benchmark::State& state) {
  const auto& m = cached_icosphere(static_cast<int>(state.range(0)));
  const MapField u = geodesic_sphere_map(m, metric(), 0.9);
  const TangentField psi = random_tangent_field(u, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hessian_apply(u, psi.vectors, 2.0, 0.05));
  }
}
BENCHMARK(bm_hessian_apply)->Arg(4)->Unit(benchmark::kMillisecond);

void bm_weighted_area_index(benchmark::State& state) {
  const auto& m = cached_icosphere(static_cast<int>(state.range(0)));
  const MapField u = geodesic_sphere_map(m, metric(), std::numbers::pi / 4.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(morse_index(u, 2.0, 0.0, 6, IndexForm::WeightedArea));
  }
}
BENCHMARK(bm_weighted_area_index)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
