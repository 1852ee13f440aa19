#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "imulab/sensor_model.hpp"

namespace imulab {

struct MeanEstimate {
  double value = 0.0;
  std::size_t n_time = 0;
  std::size_t n_sensors = 0;
  /// sigma^2 / (N K) when the per-sample sigma is supplied.
  std::optional<double> predicted_variance;
};

/// Grand mean of an N x K matrix (rows: time, columns: sensors).
MeanEstimate sample_mean(const Eigen::Ref<const Eigen::MatrixXd>& data,
                         std::optional<double> sigma = std::nullopt);

/// sigma^2 / (n_time * n_sensors).
double variance_of_mean(double sigma, long long n_time, long long n_sensors);

struct RunningStdProfile {
  std::vector<std::size_t> window_ends;
  std::vector<double> std_estimates;
};

/// Logarithmic grid of window ends in [n_min, n_max]: `per_decade` points per
/// decade, rounded to integers and deduplicated; n_max is always included.
std::vector<std::size_t> log_window_grid(std::size_t n_max, std::size_t n_min = 2,
                                         int per_decade = 10);

/// Standard error of the growing-window mean of the K-averaged series:
/// for each window end n, s_n / sqrt(n) where s_n is the (N-1) sample std of
/// the first n samples of the row-means of `data`. Empty `window_ends` selects
/// log_window_grid(N).
RunningStdProfile running_std_profile(const Eigen::Ref<const Eigen::MatrixXd>& data,
                                      std::span<const std::size_t> window_ends = {});

double rms(std::span<const double> values);
double mse(std::span<const double> estimates, double truth);

struct FisherCrlb {
  double fisher = 0.0;  ///< N / sigma^2
  double crlb = 0.0;    ///< sigma^2 / N
};

FisherCrlb fisher_crlb(double sigma, long long n);

/// 10 log10(x).
double db_ratio(double x);

/// 1.06 * std * N^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian-kernel density estimate at each evaluation point.
std::vector<double> kde_density(std::span<const double> samples, std::span<const double> eval_points,
                                std::optional<double> bandwidth = std::nullopt);

/// Evenly spaced KDE grid covering mean +/- `half_width_std` sample stds
/// (widened by 4 bandwidths so constant inputs still get a usable grid).
std::vector<double> kde_grid(std::span<const double> samples, std::size_t points,
                             double half_width_std = 5.0);

struct BiasEstimate {
  Vec6 bias = Vec6::Zero();         ///< time-mean of residuals (gx gy gz ax ay az)
  Vec6 uncertainty = Vec6::Zero();  ///< sample std / sqrt(N)
  Vec6 noise_std = Vec6::Zero();    ///< sample std of residuals after bias removal
  std::size_t n_time = 0;
};

BiasEstimate estimate_bias(const SensorRecording& recording, const GravityModel& gravity);

/// Residuals with the estimated bias subtracted per axis.
ResidualSeries compensate(const ResidualSeries& residual, const Vec6& bias);

/// Normalisation used by the quality score, SI units (median turn-on biases of
/// the reference dataset: 2.164 deg/s gyro, 0.181 m/s^2 accel).
struct QualityScale {
  double gyro;
  double accel;
};
QualityScale default_quality_scale();

/// RMS of the six bias components after dividing gyro and accel parts by `scale`.
double quality_score(const Vec6& bias, const QualityScale& scale);

struct QualityRanking {
  ArrayRecording ordered;              ///< worst sensor first
  std::vector<double> scores;          ///< aligned with `ordered`
  std::vector<std::size_t> permutation;  ///< ordered[i] == input[permutation[i]]
};

/// Sorts sensors by descending quality score; ties broken by ascending sensor_id.
QualityRanking sort_by_quality(const ArrayRecording& array, const GravityModel& gravity);
QualityRanking sort_by_quality(const ArrayRecording& array, const GravityModel& gravity,
                               const QualityScale& scale);

struct WssVerdict {
  double mean_drift_stat = 0.0;      ///< |two-sample z| between halves
  double acf_whiteness_stat = 0.0;   ///< N * sum_{k=1..L} rho_k^2
  double mean_drift_threshold = 0.0;
  double whiteness_threshold = 0.0;
  int lags = 0;
  double alpha = 0.0;
  bool passed = false;
};

/// Wide-sense-stationarity screen: split-half mean drift and ACF whiteness, each
/// at level alpha/2 so that white noise passes with probability >= 1 - alpha.
WssVerdict wss_check(std::span<const double> series, double alpha, int lags = 20);

/// Evaluation matrix of noise-level estimates over the sensor and time axes.
/// Cells are RMS over the three axes of a channel (gyro or accel).
struct EvaluationMatrix {
  double single_t0 = 0.0;  ///< per-sample std, K = 1, leading window
  double array_t0 = 0.0;   ///< per-sample std, K = k, leading window
  double single_tf = 0.0;  ///< std of the mean after N samples, K = 1
  double array_tf = 0.0;   ///< std of the mean after N samples, K = k

  double k_ratio_t0() const { return array_t0 / single_t0; }
  double k_ratio_tf() const { return array_tf / single_tf; }
  double n_ratio_single() const { return single_tf / single_t0; }
  double n_ratio_array() const { return array_tf / array_t0; }
  double diagonal_ratio() const { return array_tf / single_t0; }
};

struct EvaluationMatrices {
  EvaluationMatrix gyro;   ///< rad/s
  EvaluationMatrix accel;  ///< m/s^2
  std::size_t k = 0;
  std::size_t n_time = 0;
  std::size_t t0_window = 0;
};

/// K-averaged residual series of the first k recordings, bias compensated with
/// the averaged per-sensor bias estimates.
ResidualSeries averaged_compensated(const ArrayRecording& array, const GravityModel& gravity,
                                    std::size_t k);

/// Builds the evaluation matrix from the first recording (K = 1) and the first k
/// recordings (K = k). The t0 cells use the first `t0_window` samples.
EvaluationMatrices evaluation_matrices(const ArrayRecording& ordered, const GravityModel& gravity,
                                       std::size_t k, std::size_t t0_window);

}  // namespace imulab
