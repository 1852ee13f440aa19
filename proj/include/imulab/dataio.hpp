#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "imulab/estimation.hpp"
#include "imulab/ins_error_model.hpp"
#include "imulab/sensor_model.hpp"
#include "imulab/units.hpp"

namespace imulab::dataio {

using Json = nlohmann::ordered_json;

struct SensorFile {
  std::string sensor_id;
  std::string path;  ///< relative to the manifest directory
};

/// JSON manifest binding recording files, sample rate, gravity and units:
///   {"rate_hz": 100, "gravity_mps2": 9.81,
///    "units": {"gyro": "deg/s", "accel": "m/s2"},
///    "sensor_files": [{"sensor_id": "imu00", "path": "imu00.csv"}, ...]}
struct ArrayManifest {
  double rate_hz = 0.0;
  std::vector<SensorFile> sensor_files;
  double gravity_mps2 = GravityModel::kDefaultMagnitude;
  units::GyroUnit gyro_unit = units::GyroUnit::deg_per_s;
  std::string accel_unit = "m/s2";

  void validate() const;
};

Json to_json(const ArrayManifest& manifest);
ArrayManifest manifest_from_json(const Json& j);
ArrayManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const ArrayManifest& manifest, const std::filesystem::path& path);

/// Recording CSV: header `t,gx,gy,gz,ax,ay,az`, LF or CRLF line endings.
/// Gyro columns are in `gyro_unit`; output is SI. Uniform spacing is enforced
/// with 1e-6 s slack.
SensorRecording parse_recording_csv(std::istream& in, const std::string& sensor_id, double rate_hz,
                                    units::GyroUnit gyro_unit);
SensorRecording parse_recording_csv(std::istream& in, const SensorFile& entry,
                                    const ArrayManifest& manifest);

/// Shortest round-trip decimal for every value. Gyro values converted to `gyro_unit`.
void write_recording_csv(std::ostream& out, const SensorRecording& recording,
                         units::GyroUnit gyro_unit);

/// Loads and validates every recording named by the manifest; files are parsed
/// in parallel, alignment is checked afterwards.
ArrayRecording load_array(const std::filesystem::path& manifest_path);

/// Writes one CSV per sensor plus manifest.json into `dir`.
ArrayManifest save_array(const ArrayRecording& array, const std::filesystem::path& dir,
                         units::GyroUnit gyro_unit, double gravity_mps2);

// --- dataset summary ---------------------------------------------------------

struct RangeStats {
  double min = 0.0;
  double median = 0.0;  ///< lower-middle element for even counts
  double max = 0.0;
};

RangeStats range_stats(std::vector<double> values);

/// Per-sensor RMS quantities. Gyro fields are in deg/s, accel fields in m/s^2.
struct SensorSummaryRow {
  std::string sensor_id;
  double gyro_bias_rms = 0.0;
  double gyro_noise_rms = 0.0;
  double accel_bias_rms = 0.0;
  double accel_noise_rms = 0.0;
};

struct DatasetSummary {
  std::vector<SensorSummaryRow> sensors;
  RangeStats gyro_bias;
  RangeStats gyro_noise;
  RangeStats accel_bias;
  RangeStats accel_noise;
};

DatasetSummary dataset_summary(const ArrayRecording& array, const GravityModel& gravity);

Json to_json(const DatasetSummary& summary);
DatasetSummary summary_from_json(const Json& j);

// --- tables and reports ------------------------------------------------------

enum class Format { csv, json };

Format parse_format(const std::string& tag);
std::string extension(Format format);

/// Column-oriented numeric table; all columns have equal length.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;

  std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
  void add_column(std::string name, std::vector<double> values);
  const std::vector<double>& column(const std::string& name) const;
};

void write_table_csv(std::ostream& out, const Table& table);
Table read_table_csv(std::istream& in);
Json to_json(const Table& table);
Table table_from_json(const Json& j);

/// Trajectory as a table with columns t then the 15 state names, plus
/// (in JSON) the state index map. Covariance diagonals use "sd_" prefixed names.
Table trajectory_table(const std::vector<PropagationStep>& trajectory);

Json to_json(const Ellipsoid& ellipsoid);
Ellipsoid ellipsoid_from_json(const Json& j);

/// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);

/// Report writers. Throws IoError when the destination cannot be written.
void write_report(const Table& table, Format format, const std::filesystem::path& destination);
void write_report(const DatasetSummary& summary, Format format,
                  const std::filesystem::path& destination);
void write_report(const Ellipsoid& ellipsoid, Format format,
                  const std::filesystem::path& destination);
void write_json(const Json& j, const std::filesystem::path& destination);
Json read_json(const std::filesystem::path& source);

}  // namespace imulab::dataio
