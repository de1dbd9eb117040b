// Hot paths: increments, densities, sausage volumes, components, one detection batch.
#include <benchmark/benchmark.h>

#include "dynbool/detection.hpp"
#include "dynbool/field.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/percolation.hpp"
#include "dynbool/sausage.hpp"

using namespace dynbool;

namespace {

void BM_Increment(benchmark::State& st) {
  const StableParams p{st.range(0) / 10.0, 2};
  auto rng = make_stream(1, "bench", 0);
  std::vector<double> x(2);
  for (auto _ : st) {
    sample_increment(p, 0.01, rng, x);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_Increment)->Arg(10)->Arg(15)->Arg(20);

void BM_Density(benchmark::State& st) {
  const StableParams p{1.5, 2};
  const double r = static_cast<double>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(stable_density(p, 1.0, r));
}
BENCHMARK(BM_Density)->Arg(0)->Arg(2)->Arg(8)->Unit(benchmark::kMicrosecond);

PathSkeleton skeleton(double alpha, double horizon, double h) {
  auto rng = make_stream(2, "bench-path", 0);
  MarkedCloud one;
  one.dim = 2;
  one.ids = {0};
  one.x0 = {0.0, 0.0};
  one.radii = {1.0};
  one.marks = {0.5};
  const auto times = time_grid(horizon, h);
  return evolve(one, {alpha, 2}, times, rng).front();
}

void BM_SausageVolume(benchmark::State& st) {
  const auto path = skeleton(1.5, static_cast<double>(st.range(0)), 0.01);
  for (auto _ : st) benchmark::DoNotOptimize(sausage_volume(path, 1.0, 0.05).value);
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(path.size()));
}
BENCHMARK(BM_SausageVolume)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Components(benchmark::State& st) {
  auto rng = make_stream(3, "bench-cloud", 0);
  const auto cloud = sample_cloud(0.5, static_cast<double>(st.range(0)), RadiusLaw::constant(1.0), 2, rng);
  for (auto _ : st) benchmark::DoNotOptimize(components(cloud.x0, cloud.radii, 2).largest);
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(cloud.size()));
}
BENCHMARK(BM_Components)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_DetectionBatch(benchmark::State& st) {
  DetectionSetup d;
  d.lambda = 0.5;
  d.params = {1.5, 2};
  d.horizon = 2.0;
  d.replicas = 50;
  WindowPlan plan;
  plan.halfwidth = 10.0;
  plan.horizon = 2.0;
  for (auto _ : st)
    benchmark::DoNotOptimize(simulate_detection(d, plan, ReplicaStreams{4, "bench", 1}).survival.back());
}
BENCHMARK(BM_DetectionBatch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
