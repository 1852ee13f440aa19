#include "imulab/sensor_model.hpp"

#include <cmath>
#include <cstdio>

#include "imulab/errors.hpp"
#include "imulab/kernels.hpp"

namespace imulab {

namespace {

bool finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

void check_sigma(double value, const char* name) {
  if (!std::isfinite(value) || value < 0.0)
    throw InvalidArgument(std::string(name) + " must be finite and non-negative");
}

}  // namespace

Vec3 SensorErrorParams::gyro_noise_std() const {
  return sigma_gyro_axes ? *sigma_gyro_axes : Vec3::Constant(sigma_gyro);
}

Vec3 SensorErrorParams::accel_noise_std() const {
  return sigma_accel_axes ? *sigma_accel_axes : Vec3::Constant(sigma_accel);
}

void SensorErrorParams::validate() const {
  if (!finite(bias_gyro) || !finite(bias_accel)) throw InvalidArgument("bias must be finite");
  if (!finite(gain_gyro) || !finite(gain_accel)) throw InvalidArgument("gain matrix must be finite");
  check_sigma(sigma_gyro, "sigma_gyro");
  check_sigma(sigma_accel, "sigma_accel");
  check_sigma(sigma_gyro_bias, "sigma_gyro_bias");
  check_sigma(sigma_accel_bias, "sigma_accel_bias");
  for (const auto& axes : {sigma_gyro_axes, sigma_accel_axes}) {
    if (!axes) continue;
    for (int i = 0; i < 3; ++i) check_sigma((*axes)[i], "per-axis sigma");
  }
}

GravityModel::GravityModel(double g_magnitude) : g_(g_magnitude) {
  if (!std::isfinite(g_magnitude) || g_magnitude < 0.0)
    throw InvalidArgument("gravity magnitude must be finite and non-negative");
}

void SensorRecording::validate(double slack) const {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw DataError(sensor_id + ": rate must be positive");
  if (samples.empty()) throw DataError(sensor_id + ": recording is empty");
  const double dt = 1.0 / rate_hz;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || s.t < 0.0) throw DataError(sensor_id + ": invalid timestamp");
    if (!s.gyro.allFinite() || !s.accel.allFinite())
      throw DataError(sensor_id + ": non-finite measurement at sample " + std::to_string(i));
    if (i == 0) continue;
    const double step = s.t - samples[i - 1].t;
    if (step <= 0.0)
      throw DataError(sensor_id + ": non-monotone time at sample " + std::to_string(i));
    if (std::abs(step - dt) > slack)
      throw DataError(sensor_id + ": non-uniform spacing at sample " + std::to_string(i));
  }
}

void ArrayRecording::validate(double slack) const {
  if (recordings.empty()) throw DataError("array recording has no sensors");
  const auto& ref = recordings.front();
  for (const auto& rec : recordings) {
    rec.validate(slack);
    if (rec.size() != ref.size())
      throw DataError("sensor " + rec.sensor_id + " has " + std::to_string(rec.size()) +
                      " samples, expected " + std::to_string(ref.size()));
    if (rec.rate_hz != ref.rate_hz) throw DataError("sensor " + rec.sensor_id + " rate mismatch");
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (std::abs(rec.samples[i].t - ref.samples[i].t) > slack)
        throw DataError("sensor " + rec.sensor_id + " time base differs at sample " +
                        std::to_string(i));
    }
  }
}

std::string default_sensor_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "imu%02zu", index);
  return buf;
}

ArrayRecording simulate_array(std::span<const SensorErrorParams> params, const GravityModel& gravity,
                              double duration_s, double rate_hz, std::uint64_t seed,
                              const SimulationOptions& options) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw InvalidArgument("duration must be positive");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw InvalidArgument("rate must be positive");
  if (params.empty()) throw InvalidArgument("at least one sensor is required");
  for (const auto& p : params) p.validate();
  const double n_real = std::round(duration_s * rate_hz);
  if (n_real < 1.0) throw InvalidArgument("duration * rate rounds to zero samples");

  ArrayRecording out;
  out.recordings = kernels::omp::simulate_sensors(params, gravity, static_cast<std::size_t>(n_real),
                                                  rate_hz, seed, options);
  return out;
}

ResidualSeries residuals(const SensorRecording& recording, const GravityModel& gravity) {
  recording.validate(1e-6);
  const double g = gravity.g_magnitude();
  ResidualSeries r(static_cast<Eigen::Index>(recording.size()), 6);
  for (std::size_t i = 0; i < recording.size(); ++i) {
    const auto& s = recording.samples[i];
    const auto row = static_cast<Eigen::Index>(i);
    r.block<1, 3>(row, 0) = s.gyro.transpose();
    r.block<1, 3>(row, 3) = s.accel.transpose();
    r(row, 5) += g;
  }
  return r;
}

double gravity_rms(const GravityModel& gravity) { return gravity.nav_gravity().norm() / std::sqrt(3.0); }

}  // namespace imulab
