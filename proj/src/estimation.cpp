#include "imulab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "imulab/errors.hpp"
#include "imulab/kernels.hpp"
#include "imulab/numeric.hpp"
#include "imulab/units.hpp"

namespace imulab {

namespace {

std::vector<double> flatten(const Eigen::Ref<const Eigen::MatrixXd>& data) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index c = 0; c < data.cols(); ++c)
    for (Eigen::Index r = 0; r < data.rows(); ++r) out.push_back(data(r, c));
  return out;
}

std::vector<double> column(const ResidualSeries& series, int axis, Eigen::Index rows) {
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) out[static_cast<std::size_t>(r)] = series(r, axis);
  return out;
}

double rms3(double a, double b, double c) { return std::sqrt((a * a + b * b + c * c) / 3.0); }

}  // namespace

MeanEstimate sample_mean(const Eigen::Ref<const Eigen::MatrixXd>& data, std::optional<double> sigma) {
  if (data.rows() < 1 || data.cols() < 1) throw InvalidArgument("sample_mean of an empty matrix");
  if (!data.allFinite()) throw InvalidArgument("sample_mean input must be finite");
  MeanEstimate est;
  est.n_time = static_cast<std::size_t>(data.rows());
  est.n_sensors = static_cast<std::size_t>(data.cols());
  est.value = mean(flatten(data));
  if (sigma) {
    est.predicted_variance = variance_of_mean(*sigma, static_cast<long long>(est.n_time),
                                              static_cast<long long>(est.n_sensors));
  }
  return est;
}

double variance_of_mean(double sigma, long long n_time, long long n_sensors) {
  if (!std::isfinite(sigma) || sigma < 0.0) throw InvalidArgument("sigma must be non-negative");
  if (n_time < 1 || n_sensors < 1) throw InvalidArgument("sample and sensor counts must be >= 1");
  return sigma * sigma / (static_cast<double>(n_time) * static_cast<double>(n_sensors));
}

std::vector<std::size_t> log_window_grid(std::size_t n_max, std::size_t n_min, int per_decade) {
  if (n_min < 1 || n_max < n_min || per_decade < 1)
    throw InvalidArgument("invalid window grid bounds");
  std::vector<std::size_t> grid;
  const double lo = std::log10(static_cast<double>(n_min));
  for (int i = 0;; ++i) {
    const double v = std::round(std::pow(10.0, lo + static_cast<double>(i) / per_decade));
    if (v > static_cast<double>(n_max)) break;
    const auto n = static_cast<std::size_t>(v);
    if (grid.empty() || grid.back() != n) grid.push_back(n);
  }
  if (grid.empty() || grid.back() != n_max) grid.push_back(n_max);
  return grid;
}

RunningStdProfile running_std_profile(const Eigen::Ref<const Eigen::MatrixXd>& data,
                                      std::span<const std::size_t> window_ends) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < 2 || data.cols() < 1) throw InvalidArgument("running_std_profile needs N >= 2 and K >= 1");

  RunningStdProfile profile;
  if (window_ends.empty()) {
    profile.window_ends = log_window_grid(n);
  } else {
    profile.window_ends.assign(window_ends.begin(), window_ends.end());
    if (!std::is_sorted(profile.window_ends.begin(), profile.window_ends.end()) ||
        profile.window_ends.front() < 2 || profile.window_ends.back() > n)
      throw InvalidArgument("window ends must be sorted and lie in [2, N]");
  }

  const Eigen::VectorXd avg = data.rowwise().mean();
  // Welford accumulation; sample the running std at each window end.
  double m = 0.0, m2 = 0.0;
  std::size_t next = 0;
  profile.std_estimates.reserve(profile.window_ends.size());
  for (std::size_t i = 0; i < n && next < profile.window_ends.size(); ++i) {
    const double x = avg[static_cast<Eigen::Index>(i)];
    const double delta = x - m;
    m += delta / static_cast<double>(i + 1);
    m2 += delta * (x - m);
    while (next < profile.window_ends.size() && profile.window_ends[next] == i + 1) {
      const double count = static_cast<double>(i + 1);
      const double var = std::max(0.0, m2 / (count - 1.0));
      profile.std_estimates.push_back(std::sqrt(var / count));
      ++next;
    }
  }
  return profile;
}

double rms(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("rms of an empty sequence");
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(), [](double v) { return v * v; });
  return std::sqrt(mean(sq));
}

double mse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw InvalidArgument("mse of an empty sequence");
  std::vector<double> sq(estimates.size());
  std::transform(estimates.begin(), estimates.end(), sq.begin(), [truth](double v) {
    const double d = v - truth;
    return d * d;
  });
  return mean(sq);
}

FisherCrlb fisher_crlb(double sigma, long long n) {
  if (!std::isfinite(sigma) || !(sigma > 0.0))
    throw InvalidArgument("fisher information requires sigma > 0");
  if (n < 1) throw InvalidArgument("fisher information requires n >= 1");
  const double var = sigma * sigma;
  return {static_cast<double>(n) / var, var / static_cast<double>(n)};
}

double db_ratio(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("db_ratio requires a positive ratio");
  return 10.0 * std::log10(x);
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("bandwidth needs at least two samples");
  const double sd = std::sqrt(sample_variance(samples));
  if (sd > 0.0) return 1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
  // Degenerate (constant) input: a narrow kernel relative to the value scale.
  return 1e-6 * std::max(1.0, std::abs(samples.front()));
}

std::vector<double> kde_density(std::span<const double> samples, std::span<const double> eval_points,
                                std::optional<double> bandwidth) {
  if (samples.size() < 2) throw InvalidArgument("kde needs at least two samples");
  double h = 0.0;
  if (bandwidth) {
    if (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth))
      throw InvalidArgument("kde bandwidth must be positive");
    h = *bandwidth;
  } else {
    h = silverman_bandwidth(samples);
  }
  return kernels::omp::kde(samples, eval_points, h);
}

std::vector<double> kde_grid(std::span<const double> samples, std::size_t points,
                             double half_width_std) {
  if (samples.size() < 2) throw InvalidArgument("kde grid needs at least two samples");
  if (points < 2) throw InvalidArgument("kde grid needs at least two points");
  const double m = mean(samples);
  const double sd = std::sqrt(sample_variance(samples));
  const double half = half_width_std * sd + 4.0 * silverman_bandwidth(samples);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = m - half + 2.0 * half * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

BiasEstimate estimate_bias(const SensorRecording& recording, const GravityModel& gravity) {
  if (recording.size() < 2) throw InvalidArgument("bias estimation needs N >= 2");
  const ResidualSeries r = residuals(recording, gravity);
  BiasEstimate est;
  est.n_time = recording.size();
  const double sqrt_n = std::sqrt(static_cast<double>(recording.size()));
  for (int axis = 0; axis < 6; ++axis) {
    const auto col = column(r, axis, r.rows());
    est.bias[axis] = mean(col);
    est.noise_std[axis] = std::sqrt(sample_variance(col));
    est.uncertainty[axis] = est.noise_std[axis] / sqrt_n;
  }
  return est;
}

ResidualSeries compensate(const ResidualSeries& residual, const Vec6& bias) {
  ResidualSeries out = residual;
  out.rowwise() -= bias.transpose();
  return out;
}

QualityScale default_quality_scale() { return {units::deg_to_rad(2.164), 0.181}; }

double quality_score(const Vec6& bias, const QualityScale& scale) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) acc += std::pow(bias[i] / scale.gyro, 2);
  for (int i = 3; i < 6; ++i) acc += std::pow(bias[i] / scale.accel, 2);
  return std::sqrt(acc / 6.0);
}

QualityRanking sort_by_quality(const ArrayRecording& array, const GravityModel& gravity) {
  return sort_by_quality(array, gravity, default_quality_scale());
}

QualityRanking sort_by_quality(const ArrayRecording& array, const GravityModel& gravity,
                               const QualityScale& scale) {
  if (array.recordings.empty()) throw InvalidArgument("sort_by_quality needs K >= 1");
  const std::size_t k = array.n_sensors();
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& rec = array.recordings[i];
    const Vec6 bias = rec.size() >= 2 ? estimate_bias(rec, gravity).bias : [&] {
      const ResidualSeries r = residuals(rec, gravity);
      return Vec6(r.row(0).transpose());
    }();
    scores[i] = quality_score(bias, scale);
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return array.recordings[a].sensor_id < array.recordings[b].sensor_id;
  });

  QualityRanking out;
  out.permutation = order;
  for (std::size_t i : order) {
    out.ordered.recordings.push_back(array.recordings[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

WssVerdict wss_check(std::span<const double> series, double alpha, int lags) {
  const std::size_t n = series.size();
  if (n < 100) throw InvalidArgument("wss_check needs at least 100 samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (lags < 1 || static_cast<std::size_t>(lags) >= n / 2) throw InvalidArgument("invalid lag count");

  WssVerdict v;
  v.alpha = alpha;
  v.lags = lags;

  // Mean drift: two-sample z between the halves, pooled variance.
  const std::size_t n1 = n / 2;
  const auto first = series.first(n1);
  const auto second = series.subspan(n1);
  const double m1 = mean(first), m2 = mean(second);
  const double n1d = static_cast<double>(first.size()), n2d = static_cast<double>(second.size());
  const double pooled =
      ((n1d - 1.0) * sample_variance(first) + (n2d - 1.0) * sample_variance(second)) / (n1d + n2d - 2.0);
  const double se = std::sqrt(pooled * (1.0 / n1d + 1.0 / n2d));
  if (se > 0.0) {
    v.mean_drift_stat = std::abs(m2 - m1) / se;
  } else {
    v.mean_drift_stat = (m1 == m2) ? 0.0 : std::numeric_limits<double>::infinity();
  }

  // Whiteness: Box-Pierce statistic on the sample ACF.
  const double m = mean(series);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = series[i] - m;
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = centered[i] * centered[i];
  const double c0 = pairwise_sum(prod);
  double q = 0.0;
  if (c0 > 0.0) {
    for (int k = 1; k <= lags; ++k) {
      const std::size_t lag = static_cast<std::size_t>(k);
      prod.resize(n - lag);
      for (std::size_t i = 0; i + lag < n; ++i) prod[i] = centered[i] * centered[i + lag];
      const double rho = pairwise_sum(prod) / c0;
      q += rho * rho;
    }
    q *= static_cast<double>(n);
  }
  v.acf_whiteness_stat = q;

  // Each test at alpha/2 so the joint false-rejection rate stays below alpha.
  const boost::math::normal_distribution<double> normal;
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(lags));
  v.mean_drift_threshold = boost::math::quantile(normal, 1.0 - alpha / 4.0);
  v.whiteness_threshold = boost::math::quantile(chi2, 1.0 - alpha / 2.0);
  v.passed = v.mean_drift_stat < v.mean_drift_threshold && v.acf_whiteness_stat < v.whiteness_threshold;
  return v;
}

ResidualSeries averaged_compensated(const ArrayRecording& array, const GravityModel& gravity,
                                    std::size_t k) {
  if (k < 1 || k > array.n_sensors()) throw InvalidArgument("k must lie in [1, K]");
  ResidualSeries acc;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& rec = array.recordings[i];
    const ResidualSeries comp = compensate(residuals(rec, gravity), estimate_bias(rec, gravity).bias);
    if (i == 0) {
      acc = comp;
    } else {
      if (comp.rows() != acc.rows()) throw DataError("sensors are not aligned");
      acc += comp;
    }
  }
  acc /= static_cast<double>(k);
  return acc;
}

EvaluationMatrices evaluation_matrices(const ArrayRecording& ordered, const GravityModel& gravity,
                                       std::size_t k, std::size_t t0_window) {
  const std::size_t n = ordered.n_time();
  if (n < 2) throw InvalidArgument("evaluation matrix needs N >= 2");
  if (t0_window < 2 || t0_window > n) throw InvalidArgument("t0 window must lie in [2, N]");

  struct Cells {
    double t0[6];
    double tf[6];
  };
  auto cells_for = [&](std::size_t kk) {
    const ResidualSeries series = averaged_compensated(ordered, gravity, kk);
    Cells c{};
    const std::size_t end[] = {n};
    for (int axis = 0; axis < 6; ++axis) {
      const auto lead = column(series, axis, static_cast<Eigen::Index>(t0_window));
      c.t0[axis] = std::sqrt(sample_variance(lead));
      const RunningStdProfile p = running_std_profile(series.col(axis), end);
      c.tf[axis] = p.std_estimates.back();
    }
    return c;
  };
  const Cells single = cells_for(1);
  const Cells multi = cells_for(k);

  EvaluationMatrices out;
  out.k = k;
  out.n_time = n;
  out.t0_window = t0_window;
  auto fill = [&](EvaluationMatrix& m, int base) {
    m.single_t0 = rms3(single.t0[base], single.t0[base + 1], single.t0[base + 2]);
    m.array_t0 = rms3(multi.t0[base], multi.t0[base + 1], multi.t0[base + 2]);
    m.single_tf = rms3(single.tf[base], single.tf[base + 1], single.tf[base + 2]);
    m.array_tf = rms3(multi.tf[base], multi.tf[base + 1], multi.tf[base + 2]);
  };
  fill(out.gyro, 0);
  fill(out.accel, 3);
  return out;
}

}  // namespace imulab
