#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "imulab/dataio.hpp"
#include "imulab/ins_error_model.hpp"
#include "imulab/sensor_model.hpp"

namespace imulab::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,      ///< usage or configuration error, missing inputs
  kData = 3,       ///< malformed or inconsistent data
  kNumerical = 4,  ///< internal numerical failure
};

/// Synthetic array profiles drawn around the reference dataset's error ranges.
enum class Profile {
  median,  ///< every sensor at the median bias/noise levels, random bias directions
  spread,  ///< levels drawn uniformly between the reference min and max
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  double duration_s = 100.0;
  double rate_hz = 100.0;
  std::size_t sensors = 10;
  double gravity_mps2 = GravityModel::kDefaultMagnitude;

  // Exactly one source: a manifest, or synthetic parameters (explicit list or profile).
  std::optional<std::filesystem::path> manifest;
  std::optional<std::vector<SensorErrorParams>> sensor_params;
  Profile profile = Profile::median;

  std::vector<double> tau_grid;       ///< empty: 0..duration_s in 1 s steps
  std::vector<std::size_t> k_grid;    ///< empty: {1, K}
  std::filesystem::path out = "run";
  dataio::Format format = dataio::Format::csv;
  NoiseInterpretation noise_interpretation = NoiseInterpretation::psd_direct;

  double sigma_gyro_bias = 0.0;   ///< rad/s/sqrt(s), in-run gyro-bias intensity
  double sigma_accel_bias = 0.0;  ///< m/s^2/sqrt(s)
  bool inject_bias_walk = false;
  double t0_window_s = 10.0;
  units::GyroUnit gyro_unit = units::GyroUnit::deg_per_s;
  std::optional<Vec15> p0_sd;  ///< initial 1-sigma per state; absent means P0 = 0

  ExperimentConfig();

  /// Checks ranges and grid sanity; throws ConfigError.
  void validate() const;
  std::vector<double> effective_tau_grid() const;
  std::vector<std::size_t> effective_k_grid(std::size_t k_max) const;
};

/// Parses the JSON config schema; unknown keys are rejected.
ExperimentConfig config_from_json(const dataio::Json& j);
dataio::Json to_json(const ExperimentConfig& config);

dataio::Json params_to_json(const SensorErrorParams& p);
SensorErrorParams params_from_json(const dataio::Json& j);

/// The synthetic sensor set for a config without a manifest.
std::vector<SensorErrorParams> synthetic_sensors(const ExperimentConfig& config);

int cmd_simulate(const ExperimentConfig& config, std::ostream& log);
int cmd_estimate(const ExperimentConfig& config, std::ostream& log);
int cmd_propagate(const ExperimentConfig& config, std::ostream& log);
int cmd_report(const ExperimentConfig& config, std::ostream& log);

/// Entry point: `imulab <simulate|estimate|propagate|report> [--config path] [overrides]`.
/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace imulab::cli
