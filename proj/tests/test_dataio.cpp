#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "imulab/dataio.hpp"
#include "imulab/errors.hpp"
#include "imulab/units.hpp"

using namespace imulab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("imulab_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SensorRecording parse(const std::string& text, units::GyroUnit unit = units::GyroUnit::rad_per_s,
                      double rate = 100.0) {
  std::istringstream in(text);
  return dataio::parse_recording_csv(in, "s", rate, unit);
}

}  // namespace

TEST(ParseRecording, SingleRow) {
  const auto rec = parse("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,-9.81\n");
  ASSERT_EQ(rec.size(), 1u);
  EXPECT_EQ(rec.samples[0].accel, Vec3(0, 0, -9.81));
  EXPECT_EQ(rec.samples[0].gyro, Vec3::Zero());
}

TEST(ParseRecording, DegreesConvertedToRadians) {
  const auto rec = parse("t,gx,gy,gz,ax,ay,az\n0,2.164,0,0,0,0,-9.81\n", units::GyroUnit::deg_per_s);
  EXPECT_NEAR(rec.samples[0].gyro[0], 0.03777, 1e-5);
  EXPECT_DOUBLE_EQ(rec.samples[0].gyro[0], 2.164 * M_PI / 180.0);
}

TEST(ParseRecording, BadNumberNamesLine) {
  try {
    parse("t,gx,gy,gz,ax,ay,az\n0,0,0,0,abc,0,-9.81\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseRecording, MissingColumn) {
  EXPECT_THROW(parse("t,gx,gy,gz,ax,ay\n0,0,0,0,0,0\n"), ParseError);
  try {
    parse("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,-9.81\n0.01,0,0,0,0,0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseRecording, ColumnOrderAndCrlf) {
  const auto rec = parse("\xEF\xBB\xBF" "az,ay,ax,gz,gy,gx,t\r\n-9.81,0,0.5,0,0,0.1,0\r\n-9.81,0,0.5,0,0,0.1,0.01\r\n");
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_EQ(rec.samples[1].t, 0.01);
  EXPECT_EQ(rec.samples[0].accel[0], 0.5);
  EXPECT_EQ(rec.samples[0].gyro[0], 0.1);
}

TEST(ParseRecording, TimeChecks) {
  EXPECT_THROW(parse("t,gx,gy,gz,ax,ay,az\n0.01,0,0,0,0,0,0\n0,0,0,0,0,0,0\n"), DataError);
  EXPECT_THROW(parse("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,0\n0.02,0,0,0,0,0,0\n"), DataError);
  EXPECT_NO_THROW(parse("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,0\n0.0100005,0,0,0,0,0,0\n"));
  EXPECT_THROW(parse("t,gx,gy,gz,ax,ay,az\n"), DataError);
}

TEST(Manifest, UnknownUnitIsConfigError) {
  dataio::Json j = {{"rate_hz", 100.0},
                    {"sensor_files", dataio::Json::array({{{"sensor_id", "a"}, {"path", "a.csv"}}})},
                    {"gravity_mps2", 9.81},
                    {"units", {{"gyro", "rpm"}, {"accel", "m/s2"}}}};
  EXPECT_THROW(dataio::manifest_from_json(j), ConfigError);
  j["units"]["gyro"] = "deg/s";
  j["units"]["accel"] = "g";
  EXPECT_THROW(dataio::manifest_from_json(j), ConfigError);
  j["units"]["accel"] = "m/s2";
  const auto m = dataio::manifest_from_json(j);
  EXPECT_EQ(m.sensor_files.size(), 1u);
  EXPECT_EQ(dataio::to_json(m), j);
}

TEST(ArrayIo, SaveLoadRoundTrip) {
  std::vector<SensorErrorParams> params(3);
  for (auto& p : params) {
    p.sigma_gyro = 0.001;
    p.sigma_accel = 0.007;
    p.bias_accel = Vec3(0.1, 0.2, 0.3);
  }
  const auto array = simulate_array(params, GravityModel(), 2.0, 100.0, 4);
  const auto dir = scratch("array");
  dataio::save_array(array, dir, units::GyroUnit::rad_per_s, 9.81);
  const auto back = dataio::load_array(dir / "manifest.json");
  ASSERT_EQ(back.n_sensors(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.recordings[k].sensor_id, array.recordings[k].sensor_id);
    for (std::size_t i = 0; i < array.n_time(); ++i) {
      EXPECT_EQ(back.recordings[k].samples[i].t, array.recordings[k].samples[i].t);
      EXPECT_EQ(back.recordings[k].samples[i].gyro, array.recordings[k].samples[i].gyro);
      EXPECT_EQ(back.recordings[k].samples[i].accel, array.recordings[k].samples[i].accel);
    }
  }
}

TEST(ArrayIo, MisalignedSensorsRejected) {
  const auto dir = scratch("misaligned");
  std::ofstream(dir / "a.csv") << "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,0\n0.01,0,0,0,0,0,0\n";
  std::ofstream(dir / "b.csv") << "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,0\n";
  dataio::ArrayManifest m;
  m.rate_hz = 100.0;
  m.sensor_files = {{"a", "a.csv"}, {"b", "b.csv"}};
  dataio::save_manifest(m, dir / "manifest.json");
  EXPECT_THROW(dataio::load_array(dir / "manifest.json"), DataError);
  EXPECT_THROW(dataio::load_array(dir / "nope.json"), IoError);
}

TEST(Summary, RangeStatsLowerMedian) {
  const auto r = dataio::range_stats({4.0, 1.0, 3.0, 2.0});
  EXPECT_EQ(r.min, 1.0);
  EXPECT_EQ(r.median, 2.0);
  EXPECT_EQ(r.max, 4.0);
}

TEST(Summary, PerfectSensorIsZero) {
  const std::vector<SensorErrorParams> params(1);
  const auto array = simulate_array(params, GravityModel(), 1.0, 100.0, 1);
  const auto s = dataio::dataset_summary(array, GravityModel());
  ASSERT_EQ(s.sensors.size(), 1u);
  EXPECT_EQ(s.gyro_bias.max, 0.0);
  EXPECT_EQ(s.gyro_noise.max, 0.0);
  EXPECT_EQ(s.accel_noise.max, 0.0);
  EXPECT_LT(s.accel_bias.max, 1e-14);
}

TEST(Summary, TracksConfiguredRanges) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.987, 2.343);
  std::vector<double> targets;
  std::vector<SensorErrorParams> params(10);
  for (auto& p : params) {
    const double t = u(rng);
    targets.push_back(t);
    p.bias_gyro = Vec3::Constant(units::deg_to_rad(t));
    p.sigma_gyro = units::deg_to_rad(0.033);
    p.sigma_accel = 0.007;
  }
  const auto array = simulate_array(params, GravityModel(), 100.0, 100.0, 5);
  const auto s = dataio::dataset_summary(array, GravityModel());
  const auto expect = dataio::range_stats(targets);
  EXPECT_NEAR(s.gyro_bias.min, expect.min, 1e-3);
  EXPECT_NEAR(s.gyro_bias.median, expect.median, 1e-3);
  EXPECT_NEAR(s.gyro_bias.max, expect.max, 1e-3);
  EXPECT_NEAR(s.gyro_noise.median, 0.033, 0.002);
  EXPECT_LE(s.accel_noise.min, s.accel_noise.median);
  EXPECT_LE(s.accel_noise.median, s.accel_noise.max);
  EXPECT_THROW(dataio::dataset_summary(simulate_array(params, GravityModel(), 0.01, 100.0, 5), GravityModel()),
               InvalidArgument);
}

TEST(Reports, SummaryRoundTripsBitExact) {
  const std::vector<SensorErrorParams> params(4, [] {
    SensorErrorParams p;
    p.sigma_gyro = 1e-3;
    p.sigma_accel = 7e-3;
    p.bias_gyro = Vec3(0.01, 0.02, 0.03);
    return p;
  }());
  const auto s = dataio::dataset_summary(simulate_array(params, GravityModel(), 1.0, 100.0, 9), GravityModel());
  const auto dir = scratch("summary");
  dataio::write_report(s, dataio::Format::json, dir / "s.json");
  const auto back = dataio::summary_from_json(dataio::read_json(dir / "s.json"));
  ASSERT_EQ(back.sensors.size(), s.sensors.size());
  for (std::size_t i = 0; i < s.sensors.size(); ++i) {
    EXPECT_EQ(back.sensors[i].gyro_bias_rms, s.sensors[i].gyro_bias_rms);
    EXPECT_EQ(back.sensors[i].accel_noise_rms, s.sensors[i].accel_noise_rms);
  }
  EXPECT_EQ(back.gyro_noise.median, s.gyro_noise.median);
}

TEST(Reports, EmptyTrajectoryHeaderOnly) {
  const auto dir = scratch("empty");
  dataio::write_report(dataio::trajectory_table({}), dataio::Format::csv, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header, extra;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,dp_x,dp_y,dp_z", 0), 0u);
  EXPECT_FALSE(std::getline(in, extra));
}

TEST(Reports, EllipsoidSchema) {
  Ellipsoid e;
  e.semi_axes = Vec3(3, 2, 1);
  const auto dir = scratch("ell");
  dataio::write_report(e, dataio::Format::json, dir / "e.json");
  const auto j = dataio::read_json(dir / "e.json");
  EXPECT_TRUE(j.contains("centroid"));
  EXPECT_TRUE(j.contains("semi_axes"));
  EXPECT_TRUE(j.contains("orientation"));
  const auto back = dataio::ellipsoid_from_json(j);
  EXPECT_EQ(back.semi_axes, e.semi_axes);
}

TEST(Reports, TableCsvAndJsonRoundTrip) {
  dataio::Table t;
  t.add_column("a", {0.1, 1.0 / 3.0, -2.5e-300});
  t.add_column("b", {std::nan(""), 1e300, 0.0});
  std::stringstream ss;
  dataio::write_table_csv(ss, t);
  const auto back = dataio::read_table_csv(ss);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.column("a"), t.column("a"));
  EXPECT_TRUE(std::isnan(back.column("b")[0]));
  EXPECT_EQ(back.column("b")[1], 1e300);
  const auto fromj = dataio::table_from_json(dataio::to_json(t));
  EXPECT_EQ(fromj.column("a"), t.column("a"));
  EXPECT_THROW(t.add_column("c", {1.0}), InvalidArgument);
}

TEST(Reports, UnwritableDestination) {
  dataio::Table t;
  EXPECT_THROW(dataio::write_report(t, dataio::Format::csv, "/proc/imulab/nope.csv"), IoError);
}

TEST(Reports, ShortestRoundTripText) {
  EXPECT_EQ(dataio::format_double(0.1), "0.1");
  EXPECT_EQ(dataio::format_double(9.81), "9.81");
  EXPECT_EQ(std::stod(dataio::format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(dataio::parse_format("json"), dataio::Format::json);
  EXPECT_THROW(dataio::parse_format("xml"), ConfigError);
}
