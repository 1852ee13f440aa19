#include "imulab/kernels.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "imulab/numeric.hpp"
#include "imulab/rng.hpp"

namespace imulab::kernels {

SensorRecording simulate_sensor(const SensorErrorParams& params, const GravityModel& gravity,
                                std::size_t n, double rate_hz, std::uint64_t seed,
                                std::size_t index, const SimulationOptions& options) {
  Rng rng = make_stream(seed, index);
  std::normal_distribution<double> unit(0.0, 1.0);

  const Vec3 gyro_sd = params.gyro_noise_std();
  const Vec3 accel_sd = params.accel_noise_std();
  // Leveled, stationary: specific force -T_n^b g^n seen through the accel gain.
  const Vec3 accel_truth =
      -(Mat3::Identity() + params.gain_accel) * gravity.body_to_nav().transpose() * gravity.nav_gravity();
  const double walk_scale = std::sqrt(1.0 / rate_hz);

  SensorRecording rec;
  rec.sensor_id = default_sensor_id(index);
  rec.rate_hz = rate_hz;
  rec.samples.resize(n);

  Vec3 bg = params.bias_gyro;
  Vec3 ba = params.bias_accel;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = rec.samples[i];
    s.t = static_cast<double>(i) / rate_hz;
    for (int a = 0; a < 3; ++a) s.gyro[a] = bg[a] + gyro_sd[a] * unit(rng);
    for (int a = 0; a < 3; ++a) s.accel[a] = accel_truth[a] + ba[a] + accel_sd[a] * unit(rng);
    if (options.inject_bias_walk) {
      for (int a = 0; a < 3; ++a) bg[a] += params.sigma_gyro_bias * walk_scale * unit(rng);
      for (int a = 0; a < 3; ++a) ba[a] += params.sigma_accel_bias * walk_scale * unit(rng);
    }
  }
  return rec;
}

double mean_trial(const MeanTrialSpec& spec, std::size_t trial) {
  Rng rng = make_stream(spec.seed, trial);
  std::normal_distribution<double> dist(spec.mu, spec.sigma);
  std::vector<double> block(spec.n_time * spec.n_sensors);
  for (double& v : block) v = dist(rng);
  return pairwise_sum(block) / static_cast<double>(block.size());
}

Mat15 q_integrand(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps,
                  int node) {
  const double h = tau / steps;
  const double s = h * node;
  const double weight = (node == 0 || node == steps) ? 1.0 : (node % 2 ? 4.0 : 2.0);
  Eigen::Matrix<double, 12, 12> S = Eigen::Matrix<double, 12, 12>::Zero();
  S.diagonal() << Vec3::Constant(spectra.s_a), Vec3::Constant(spectra.s_g),
      Vec3::Constant(spectra.s_ab), Vec3::Constant(spectra.s_gb);
  const Mat15x12 phig = phi_closed(sys, s) * sys.G;
  return (weight * h / 3.0) * (phig * S * phig.transpose());
}

namespace {

Mat15 pairwise_matrix_sum(std::span<const Mat15> terms) {
  if (terms.size() == 1) return terms.front();
  const std::size_t half = terms.size() / 2;
  return pairwise_matrix_sum(terms.first(half)) + pairwise_matrix_sum(terms.subspan(half));
}

int even_steps(int steps) { return steps % 2 ? steps + 1 : steps; }

double kde_at(std::span<const double> samples, double x, double bandwidth) {
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  double acc = 0.0;
  for (double s : samples) {
    const double u = (x - s) / bandwidth;
    acc += std::exp(-0.5 * u * u);
  }
  return acc * norm;
}

}  // namespace

namespace serial {

std::vector<SensorRecording> simulate_sensors(std::span<const SensorErrorParams> params,
                                              const GravityModel& gravity, std::size_t n,
                                              double rate_hz, std::uint64_t seed,
                                              const SimulationOptions& options) {
  std::vector<SensorRecording> out;
  out.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k)
    out.push_back(simulate_sensor(params[k], gravity, n, rate_hz, seed, k, options));
  return out;
}

std::vector<double> mean_trials(const MeanTrialSpec& spec) {
  std::vector<double> out(spec.trials);
  for (std::size_t t = 0; t < spec.trials; ++t) out[t] = mean_trial(spec, t);
  return out;
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> eval_points,
                        double bandwidth) {
  std::vector<double> out(eval_points.size());
  for (std::size_t i = 0; i < eval_points.size(); ++i) out[i] = kde_at(samples, eval_points[i], bandwidth);
  return out;
}

Mat15 simpson_q(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps) {
  steps = even_steps(steps);
  std::vector<Mat15> terms(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) terms[static_cast<std::size_t>(i)] = q_integrand(sys, spectra, tau, steps, i);
  return pairwise_matrix_sum(terms);
}

}  // namespace serial

namespace omp {

std::vector<SensorRecording> simulate_sensors(std::span<const SensorErrorParams> params,
                                              const GravityModel& gravity, std::size_t n,
                                              double rate_hz, std::uint64_t seed,
                                              const SimulationOptions& options) {
  std::vector<SensorRecording> out(params.size());
  const auto count = static_cast<std::ptrdiff_t>(params.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_limit())
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    out[idx] = simulate_sensor(params[idx], gravity, n, rate_hz, seed, idx, options);
  }
  return out;
}

std::vector<double> mean_trials(const MeanTrialSpec& spec) {
  std::vector<double> out(spec.trials);
  const auto count = static_cast<std::ptrdiff_t>(spec.trials);
#pragma omp parallel for schedule(static) num_threads(thread_limit())
  for (std::ptrdiff_t t = 0; t < count; ++t)
    out[static_cast<std::size_t>(t)] = mean_trial(spec, static_cast<std::size_t>(t));
  return out;
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> eval_points,
                        double bandwidth) {
  std::vector<double> out(eval_points.size());
  const auto count = static_cast<std::ptrdiff_t>(eval_points.size());
#pragma omp parallel for schedule(static) num_threads(thread_limit())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out[idx] = kde_at(samples, eval_points[idx], bandwidth);
  }
  return out;
}

Mat15 simpson_q(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau, int steps) {
  steps = even_steps(steps);
  std::vector<Mat15> terms(static_cast<std::size_t>(steps) + 1);
#pragma omp parallel for schedule(static) num_threads(thread_limit())
  for (int i = 0; i <= steps; ++i) terms[static_cast<std::size_t>(i)] = q_integrand(sys, spectra, tau, steps, i);
  return pairwise_matrix_sum(terms);
}

}  // namespace omp

}  // namespace imulab::kernels
