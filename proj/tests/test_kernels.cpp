#include <vector>

#include <gtest/gtest.h>

#include "imulab/ins_error_model.hpp"
#include "imulab/kernels.hpp"
#include "imulab/units.hpp"

using namespace imulab;

TEST(Kernels, SimulationSerialEqualsParallel) {
  std::vector<SensorErrorParams> params(7);
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k].sigma_gyro = 1e-3 * static_cast<double>(k + 1);
    params[k].sigma_accel = 7e-3;
    params[k].sigma_gyro_bias = 1e-4;
    params[k].bias_accel = Vec3(0.1, 0.0, -0.1);
  }
  SimulationOptions opts;
  opts.inject_bias_walk = true;
  const auto a = kernels::serial::simulate_sensors(params, GravityModel(), 500, 100.0, 13, opts);
  const auto b = kernels::omp::simulate_sensors(params, GravityModel(), 500, 100.0, 13, opts);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < 500; ++i) {
      ASSERT_EQ(a[k].samples[i].gyro, b[k].samples[i].gyro);
      ASSERT_EQ(a[k].samples[i].accel, b[k].samples[i].accel);
    }
}

TEST(Kernels, MeanTrialsSerialEqualsParallel) {
  kernels::MeanTrialSpec spec{64, 200, 5, 0.5, 2.0, 3};
  EXPECT_EQ(kernels::serial::mean_trials(spec), kernels::omp::mean_trials(spec));
  EXPECT_EQ(kernels::mean_trial(spec, 10), kernels::serial::mean_trials(spec)[10]);
}

TEST(Kernels, KdeSerialEqualsParallel) {
  std::vector<double> s, pts;
  for (int i = 0; i < 1000; ++i) s.push_back(std::sin(i * 0.37) + 0.001 * i);
  for (int i = 0; i < 300; ++i) pts.push_back(-2.0 + 0.02 * i);
  EXPECT_EQ(kernels::serial::kde(s, pts, 0.1), kernels::omp::kde(s, pts, 0.1));
}

TEST(Kernels, SimpsonSerialEqualsParallel) {
  const auto sys = build_system(GravityModel());
  const NoiseSpectra s{1e-4, 1e-6, 1e-5, 1e-7};
  EXPECT_EQ(kernels::serial::simpson_q(sys, s, 50.0, 400), kernels::omp::simpson_q(sys, s, 50.0, 400));
}

TEST(Kernels, ThreadCountDoesNotChangeResults) {
  kernels::MeanTrialSpec spec{40, 100, 3, 0.0, 1.0, 1};
  const auto ref = kernels::serial::mean_trials(spec);
  for (const char* n : {"1", "2", "3"}) {
    setenv("IMULAB_THREADS", n, 1);
    EXPECT_EQ(kernels::omp::mean_trials(spec), ref) << n;
  }
  unsetenv("IMULAB_THREADS");
}
