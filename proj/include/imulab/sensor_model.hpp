#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace imulab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Deterministic and stochastic error parameters of one gyro/accelerometer triad.
/// All quantities are SI: rad/s for gyro terms, m/s^2 for accelerometer terms.
struct SensorErrorParams {
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();
  double sigma_gyro = 0.0;   ///< white-noise std per sample, isotropic
  double sigma_accel = 0.0;  ///< white-noise std per sample, isotropic
  double sigma_gyro_bias = 0.0;   ///< in-run gyro-bias intensity (rad/s/sqrt(s))
  double sigma_accel_bias = 0.0;  ///< in-run accel-bias intensity (m/s^2/sqrt(s))
  /// Optional per-axis noise std overriding the isotropic value.
  std::optional<Vec3> sigma_gyro_axes;
  std::optional<Vec3> sigma_accel_axes;
  Mat3 gain_gyro = Mat3::Zero();
  Mat3 gain_accel = Mat3::Zero();

  Vec3 gyro_noise_std() const;
  Vec3 accel_noise_std() const;

  /// Throws InvalidArgument on negative or non-finite entries.
  void validate() const;
};

/// Leveled NED gravity: g^n = (0, 0, +g), body frame coincident with nav frame.
class GravityModel {
 public:
  static constexpr double kDefaultMagnitude = 9.81;

  GravityModel() = default;
  explicit GravityModel(double g_magnitude);

  double g_magnitude() const { return g_; }
  Vec3 nav_gravity() const { return {0.0, 0.0, g_}; }
  Mat3 body_to_nav() const { return Mat3::Identity(); }

 private:
  double g_ = kDefaultMagnitude;
};

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

struct SensorRecording {
  std::string sensor_id;
  double rate_hz = 0.0;
  std::vector<ImuSample> samples;

  std::size_t size() const { return samples.size(); }

  /// Checks N >= 1, rate > 0, and uniform spacing within `slack` seconds.
  void validate(double slack = 1e-9) const;
};

struct ArrayRecording {
  std::vector<SensorRecording> recordings;

  std::size_t n_sensors() const { return recordings.size(); }
  std::size_t n_time() const { return recordings.empty() ? 0 : recordings.front().size(); }
  double rate_hz() const { return recordings.empty() ? 0.0 : recordings.front().rate_hz; }

  /// Checks K >= 1 and that every recording shares N, rate and time base.
  void validate(double slack = 1e-9) const;
};

struct SimulationOptions {
  /// Drive the biases as random walks with the in-run intensities. Off by
  /// default: over ~100 s the in-run variation is negligible.
  bool inject_bias_walk = false;
};

/// Stationary, leveled array simulation. Sensor k draws from its own RNG stream
/// derived from (seed, k), so the output does not depend on thread count.
/// N = round(duration_s * rate_hz). Sensor ids are "imu00", "imu01", ...
ArrayRecording simulate_array(std::span<const SensorErrorParams> params, const GravityModel& gravity,
                              double duration_s, double rate_hz, std::uint64_t seed,
                              const SimulationOptions& options = {});

std::string default_sensor_id(std::size_t index);

/// Residual series against the stationary ground truth (omega = 0, f = -g e_z).
/// Columns: gx gy gz ax ay az.
using ResidualSeries = Eigen::Matrix<double, Eigen::Dynamic, 6>;

ResidualSeries residuals(const SensorRecording& recording, const GravityModel& gravity);

/// ||g^n|| / sqrt(3): RMS of the gravity vector across its three components.
double gravity_rms(const GravityModel& gravity);

}  // namespace imulab
