// Serial reference against the OpenMP path for the data-parallel kernels.
// The second argument of every benchmark selects Exec: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include "covspde/cosurface.hpp"
#include "covspde/observables.hpp"

using namespace covspde;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(1) ? Exec::Parallel : Exec::Serial; }

void lattice_kernel_build(benchmark::State& st) {
  const auto g = green_of(proca_operator(1.0, 1.0, -1.0));
  const Lattice lat(3, 8.0, static_cast<int>(st.range(0)));
  for (auto _ : st) {
    clear_kernel_cache();
    benchmark::DoNotOptimize(lattice_kernel(*g, lat, false, exec_of(st)));
  }
}

void pairing_mc(benchmark::State& st) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const Lattice lat(3, 8.0, 16);
  LevyMeasure::Params p;
  p.rho = 1.0;
  p.scale = 1.0;
  const NoiseSpec spec(op.rep_in(), 0.5 * MatR::Identity(6, 6), builtin_levy("radial_gauss", op.rep_in(), p));
  CounterRng rng(1, Stream::Test, 0);
  const TrigField f = random_trig_field(rng, 3, 8.0, 6, 3, 2);
  for (auto _ : st)
    benchmark::DoNotOptimize(
        pairing_samples(*g, spec, lat, {f}, {1, static_cast<std::uint64_t>(st.range(0))}, Deposit::NearestSite,
                        exec_of(st)));
}

void loop_mc(benchmark::State& st) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  LevyMeasure::Params p;
  p.rho = 0.5;
  p.scale = 1.0;
  const auto levy = builtin_levy("radial_gauss", op.rep_in(), p);
  VecR c = VecR::Zero(3);
  LoopOptions opt;
  opt.exec = exec_of(st);
  for (auto _ : st)
    benchmark::DoNotOptimize(loop_schwinger_mc(g, levy, {Loop::circle(c, 1.0, 0, 1)}, ComponentMap::range(3, 0),
                                               {0.4, 0.2, 0.1, 0.05},
                                               {1, static_cast<std::uint64_t>(st.range(0))}, opt));
}

void loop_closed(benchmark::State& st) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  LevyMeasure::Params p;
  p.rho = 0.5;
  p.scale = 1.0;
  const auto levy = builtin_levy("radial_gauss", op.rep_in(), p);
  VecR c = VecR::Zero(3);
  LoopOptions opt;
  opt.exec = exec_of(st);
  opt.cutoff = static_cast<double>(st.range(0));
  opt.rel_tol = 1e-2;
  for (auto _ : st)
    benchmark::DoNotOptimize(
        loop_schwinger_closed(g, levy, {Loop::circle(c, 1.0, 0, 1)}, ComponentMap::range(3, 0), opt));
}

}  // namespace

BENCHMARK(lattice_kernel_build)->ArgsProduct({{16, 32}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(pairing_mc)->ArgsProduct({{64}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(loop_mc)->ArgsProduct({{8}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(loop_closed)->ArgsProduct({{3}, {0, 1}})->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
