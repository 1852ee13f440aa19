#pragma once

// Data-parallel kernels. Each kernel has an OpenMP implementation (omp::) used by
// the library and a plain serial reference (serial::) kept for equivalence tests
// and benchmarking. Both produce bit-identical output: work items own their RNG
// streams and all reductions run in a fixed order after the parallel region.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "imulab/ins_error_model.hpp"
#include "imulab/sensor_model.hpp"

namespace imulab::kernels {

/// Simulates one sensor with n samples; RNG stream derived from (seed, index).
SensorRecording simulate_sensor(const SensorErrorParams& params, const GravityModel& gravity,
                                std::size_t n, double rate_hz, std::uint64_t seed,
                                std::size_t index, const SimulationOptions& options);

/// Monte-Carlo trial configuration for the grand-mean estimator of an n x k
/// block of i.i.d. N(mu, sigma^2) samples.
struct MeanTrialSpec {
  std::size_t trials = 0;
  std::size_t n_time = 0;
  std::size_t n_sensors = 0;
  double mu = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Evaluates the grand mean of a single trial; trial t uses stream (seed, t).
double mean_trial(const MeanTrialSpec& spec, std::size_t trial);

/// Scalar Simpson node: weight * Phi(s) G S G^T Phi(s)^T at node i of `steps`.
Mat15 q_integrand(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps,
                  int node);

namespace serial {
std::vector<SensorRecording> simulate_sensors(std::span<const SensorErrorParams> params,
                                              const GravityModel& gravity, std::size_t n,
                                              double rate_hz, std::uint64_t seed,
                                              const SimulationOptions& options);
std::vector<double> mean_trials(const MeanTrialSpec& spec);
std::vector<double> kde(std::span<const double> samples, std::span<const double> eval_points,
                        double bandwidth);
Mat15 simpson_q(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps);
}  // namespace serial

namespace omp {
std::vector<SensorRecording> simulate_sensors(std::span<const SensorErrorParams> params,
                                              const GravityModel& gravity, std::size_t n,
                                              double rate_hz, std::uint64_t seed,
                                              const SimulationOptions& options);
std::vector<double> mean_trials(const MeanTrialSpec& spec);
std::vector<double> kde(std::span<const double> samples, std::span<const double> eval_points,
                        double bandwidth);
Mat15 simpson_q(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps);
}  // namespace omp

}  // namespace imulab::kernels
