#pragma once

#include <numbers>
#include <string>
#include <string_view>

#include "imulab/errors.hpp"

// Single point of truth for angular-rate unit conversion. Library code works in
// SI (rad/s, m/s^2); file and CLI boundaries call through here.
namespace imulab::units {

enum class GyroUnit { deg_per_s, rad_per_s };

inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

inline constexpr double deg_to_rad(double deg) { return deg * kRadPerDeg; }
inline constexpr double rad_to_deg(double rad) { return rad / kRadPerDeg; }

inline double gyro_to_si(double value, GyroUnit unit) {
  return unit == GyroUnit::deg_per_s ? deg_to_rad(value) : value;
}

inline double gyro_from_si(double value, GyroUnit unit) {
  return unit == GyroUnit::deg_per_s ? rad_to_deg(value) : value;
}

inline GyroUnit parse_gyro_unit(std::string_view tag) {
  if (tag == "deg/s") return GyroUnit::deg_per_s;
  if (tag == "rad/s") return GyroUnit::rad_per_s;
  throw ConfigError("unknown gyro unit '" + std::string(tag) + "' (expected deg/s or rad/s)");
}

inline std::string to_string(GyroUnit unit) {
  return unit == GyroUnit::deg_per_s ? "deg/s" : "rad/s";
}

// Accelerometer quantities are only accepted in m/s^2.
inline void check_accel_unit(std::string_view tag) {
  if (tag != "m/s2") throw ConfigError("unknown accel unit '" + std::string(tag) + "' (expected m/s2)");
}

}  // namespace imulab::units
