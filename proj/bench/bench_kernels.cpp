// Serial reference kernels against their OpenMP counterparts.
// Thread count follows IMULAB_THREADS (0 or unset: OpenMP default).

#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "imulab/ins_error_model.hpp"
#include "imulab/kernels.hpp"
#include "imulab/units.hpp"

using namespace imulab;

namespace {

std::vector<SensorErrorParams> array_params(std::size_t k) {
  std::vector<SensorErrorParams> params(k);
  for (auto& p : params) {
    p.sigma_gyro = units::deg_to_rad(0.033);
    p.sigma_accel = 0.007;
  }
  return params;
}

template <bool Parallel>
void BM_SimulateSensors(benchmark::State& state) {
  const auto params = array_params(static_cast<std::size_t>(state.range(0)));
  const std::size_t n = 10000;
  for (auto _ : state) {
    auto out = Parallel ? kernels::omp::simulate_sensors(params, GravityModel(), n, 100.0, 7, {})
                        : kernels::serial::simulate_sensors(params, GravityModel(), n, 100.0, 7, {});
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(n));
}

template <bool Parallel>
void BM_MeanTrials(benchmark::State& state) {
  kernels::MeanTrialSpec spec{static_cast<std::size_t>(state.range(0)), 10000, 10, 0.0, 1.0, 3};
  for (auto _ : state) {
    auto m = Parallel ? kernels::omp::mean_trials(spec) : kernels::serial::mean_trials(spec);
    benchmark::DoNotOptimize(m.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Kde(benchmark::State& state) {
  std::vector<double> samples(10000), points(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = std::sin(0.37 * static_cast<double>(i));
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = -2.0 + 4.0 * static_cast<double>(i) / points.size();
  for (auto _ : state) {
    auto d = Parallel ? kernels::omp::kde(samples, points, 0.05) : kernels::serial::kde(samples, points, 0.05);
    benchmark::DoNotOptimize(d.data());
  }
}

template <bool Parallel>
void BM_SimpsonQ(benchmark::State& state) {
  const auto sys = build_system(GravityModel());
  const NoiseSpectra s{4.9e-5, 3.3e-7, 3.3e-6, 1.4e-7};
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Mat15 q = Parallel ? kernels::omp::simpson_q(sys, s, 100.0, steps) : kernels::serial::simpson_q(sys, s, 100.0, steps);
    benchmark::DoNotOptimize(q.data());
  }
}

}  // namespace

BENCHMARK(BM_SimulateSensors<false>)->Name("simulate/serial")->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateSensors<true>)->Name("simulate/omp")->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeanTrials<false>)->Name("mean_trials/serial")->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeanTrials<true>)->Name("mean_trials/omp")->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Kde<false>)->Name("kde/serial")->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Kde<true>)->Name("kde/omp")->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimpsonQ<false>)->Name("simpson_q/serial")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimpsonQ<true>)->Name("simpson_q/omp")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
