#include "imulab/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "imulab/errors.hpp"
#include "imulab/numeric.hpp"

namespace imulab::dataio {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 7> kRecordingColumns = {"t", "gx", "gy", "gz", "ax", "ay", "az"};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ofstream open_for_write(const fs::path& destination) {
  if (destination.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(destination.parent_path(), ec);
  }
  std::ofstream out(destination, std::ios::binary);
  if (!out) throw IoError("cannot write " + destination.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& destination) {
  out.flush();
  if (!out) throw IoError("write failed for " + destination.string());
}

Json vec_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Vec3 vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array", 0);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json range_json(const RangeStats& r) { return Json{{"min", r.min}, {"median", r.median}, {"max", r.max}}; }

RangeStats range_from_json(const Json& j) {
  return {j.at("min").get<double>(), j.at("median").get<double>(), j.at("max").get<double>()};
}

}  // namespace

// --- manifest ------------------------------------------------------------------

void ArrayManifest::validate() const {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ConfigError("manifest rate_hz must be positive");
  if (sensor_files.empty()) throw ConfigError("manifest lists no sensor files");
  if (!std::isfinite(gravity_mps2) || gravity_mps2 < 0.0) throw ConfigError("manifest gravity must be >= 0");
  units::check_accel_unit(accel_unit);
}

Json to_json(const ArrayManifest& m) {
  Json files = Json::array();
  for (const auto& f : m.sensor_files) files.push_back(Json{{"sensor_id", f.sensor_id}, {"path", f.path}});
  return Json{{"rate_hz", m.rate_hz},
              {"sensor_files", files},
              {"gravity_mps2", m.gravity_mps2},
              {"units", Json{{"gyro", units::to_string(m.gyro_unit)}, {"accel", m.accel_unit}}}};
}

ArrayManifest manifest_from_json(const Json& j) {
  ArrayManifest m;
  try {
    m.rate_hz = j.at("rate_hz").get<double>();
    for (const auto& f : j.at("sensor_files"))
      m.sensor_files.push_back({f.at("sensor_id").get<std::string>(), f.at("path").get<std::string>()});
    if (j.contains("gravity_mps2")) m.gravity_mps2 = j.at("gravity_mps2").get<double>();
    const auto& u = j.at("units");
    m.gyro_unit = units::parse_gyro_unit(u.at("gyro").get<std::string>());
    m.accel_unit = u.at("accel").get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

ArrayManifest load_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

void save_manifest(const ArrayManifest& manifest, const fs::path& path) {
  manifest.validate();
  write_json(to_json(manifest), path);
}

// --- recordings ----------------------------------------------------------------

SensorRecording parse_recording_csv(std::istream& in, const std::string& sensor_id, double rate_hz,
                                    units::GyroUnit gyro_unit) {
  std::string line;
  if (!getline_stripped(in, line)) throw ParseError(sensor_id + ": empty recording file", 1);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  const auto header = split(line, ',');
  std::array<std::size_t, 7> index{};
  for (std::size_t c = 0; c < kRecordingColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](std::string_view h) { return trim(h) == kRecordingColumns[c]; });
    if (it == header.end())
      throw ParseError(sensor_id + ": missing column '" + kRecordingColumns[c] + "'", 1);
    index[c] = static_cast<std::size_t>(it - header.begin());
  }

  SensorRecording rec;
  rec.sensor_id = sensor_id;
  rec.rate_hz = rate_hz;
  std::size_t line_no = 1;
  while (getline_stripped(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size())
      throw ParseError(sensor_id + ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < v.size(); ++c) {
      if (!parse_double(fields[index[c]], v[c]) || !std::isfinite(v[c]))
        throw ParseError(sensor_id + ": invalid number in column '" + kRecordingColumns[c] + "'", line_no);
    }
    ImuSample s;
    s.t = v[0];
    for (int a = 0; a < 3; ++a) {
      s.gyro[a] = units::gyro_to_si(v[1 + a], gyro_unit);
      s.accel[a] = v[4 + a];
    }
    if (!rec.samples.empty() && s.t <= rec.samples.back().t)
      throw DataError(sensor_id + ": non-monotone time at line " + std::to_string(line_no));
    rec.samples.push_back(s);
  }
  if (rec.samples.empty()) throw DataError(sensor_id + ": recording has no rows");
  rec.validate(1e-6);
  return rec;
}

SensorRecording parse_recording_csv(std::istream& in, const SensorFile& entry,
                                    const ArrayManifest& manifest) {
  units::check_accel_unit(manifest.accel_unit);
  return parse_recording_csv(in, entry.sensor_id, manifest.rate_hz, manifest.gyro_unit);
}

void write_recording_csv(std::ostream& out, const SensorRecording& recording,
                         units::GyroUnit gyro_unit) {
  out << "t,gx,gy,gz,ax,ay,az\n";
  std::string row;
  for (const auto& s : recording.samples) {
    row.clear();
    row += format_double(s.t);
    for (int a = 0; a < 3; ++a) (row += ',') += format_double(units::gyro_from_si(s.gyro[a], gyro_unit));
    for (int a = 0; a < 3; ++a) (row += ',') += format_double(s.accel[a]);
    row += '\n';
    out << row;
  }
}

ArrayRecording load_array(const fs::path& manifest_path) {
  const ArrayManifest manifest = load_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const auto count = static_cast<std::ptrdiff_t>(manifest.sensor_files.size());

  ArrayRecording array;
  array.recordings.resize(manifest.sensor_files.size());
  std::vector<std::exception_ptr> errors(manifest.sensor_files.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_limit())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      const auto& entry = manifest.sensor_files[idx];
      std::ifstream in(base / entry.path, std::ios::binary);
      if (!in) throw IoError("cannot open " + (base / entry.path).string());
      array.recordings[idx] = parse_recording_csv(in, entry, manifest);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  array.validate(1e-6);
  return array;
}

ArrayManifest save_array(const ArrayRecording& array, const fs::path& dir, units::GyroUnit gyro_unit,
                         double gravity_mps2) {
  array.validate();
  ArrayManifest manifest;
  manifest.rate_hz = array.rate_hz();
  manifest.gravity_mps2 = gravity_mps2;
  manifest.gyro_unit = gyro_unit;
  for (const auto& rec : array.recordings) {
    const std::string file = rec.sensor_id + ".csv";
    auto out = open_for_write(dir / file);
    write_recording_csv(out, rec, gyro_unit);
    finish(out, dir / file);
    manifest.sensor_files.push_back({rec.sensor_id, file});
  }
  save_manifest(manifest, dir / "manifest.json");
  return manifest;
}

// --- summary -------------------------------------------------------------------

RangeStats range_stats(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("range of an empty sequence");
  std::sort(values.begin(), values.end());
  return {values.front(), values[(values.size() - 1) / 2], values.back()};
}

DatasetSummary dataset_summary(const ArrayRecording& array, const GravityModel& gravity) {
  if (array.recordings.empty()) throw InvalidArgument("dataset summary needs K >= 1");
  if (array.n_time() < 2) throw InvalidArgument("dataset summary needs N >= 2");
  DatasetSummary summary;
  std::vector<double> gb, gn, ab, an;
  for (const auto& rec : array.recordings) {
    const BiasEstimate est = estimate_bias(rec, gravity);
    auto rms_of = [&](int base, bool bias) {
      const Vec6& v = bias ? est.bias : est.noise_std;
      const std::array<double, 3> xs = {v[base], v[base + 1], v[base + 2]};
      return rms(xs);
    };
    SensorSummaryRow row;
    row.sensor_id = rec.sensor_id;
    row.gyro_bias_rms = units::rad_to_deg(rms_of(0, true));
    row.gyro_noise_rms = units::rad_to_deg(rms_of(0, false));
    row.accel_bias_rms = rms_of(3, true);
    row.accel_noise_rms = rms_of(3, false);
    gb.push_back(row.gyro_bias_rms);
    gn.push_back(row.gyro_noise_rms);
    ab.push_back(row.accel_bias_rms);
    an.push_back(row.accel_noise_rms);
    summary.sensors.push_back(row);
  }
  summary.gyro_bias = range_stats(gb);
  summary.gyro_noise = range_stats(gn);
  summary.accel_bias = range_stats(ab);
  summary.accel_noise = range_stats(an);
  return summary;
}

Json to_json(const DatasetSummary& s) {
  Json sensors = Json::array();
  for (const auto& r : s.sensors) {
    sensors.push_back(Json{{"sensor_id", r.sensor_id},
                           {"gyro_bias_rms", r.gyro_bias_rms},
                           {"gyro_noise_rms", r.gyro_noise_rms},
                           {"accel_bias_rms", r.accel_bias_rms},
                           {"accel_noise_rms", r.accel_noise_rms}});
  }
  return Json{{"units", Json{{"gyro", "deg/s"}, {"accel", "m/s2"}}},
              {"sensors", sensors},
              {"ranges", Json{{"gyro_bias_rms", range_json(s.gyro_bias)},
                              {"gyro_noise_rms", range_json(s.gyro_noise)},
                              {"accel_bias_rms", range_json(s.accel_bias)},
                              {"accel_noise_rms", range_json(s.accel_noise)}}}};
}

DatasetSummary summary_from_json(const Json& j) {
  DatasetSummary s;
  try {
    for (const auto& r : j.at("sensors")) {
      s.sensors.push_back({r.at("sensor_id").get<std::string>(), r.at("gyro_bias_rms").get<double>(),
                           r.at("gyro_noise_rms").get<double>(), r.at("accel_bias_rms").get<double>(),
                           r.at("accel_noise_rms").get<double>()});
    }
    const auto& ranges = j.at("ranges");
    s.gyro_bias = range_from_json(ranges.at("gyro_bias_rms"));
    s.gyro_noise = range_from_json(ranges.at("gyro_noise_rms"));
    s.accel_bias = range_from_json(ranges.at("accel_bias_rms"));
    s.accel_noise = range_from_json(ranges.at("accel_noise_rms"));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed dataset summary: ") + e.what(), 0);
  }
  return s;
}

// --- tables --------------------------------------------------------------------

Format parse_format(const std::string& tag) {
  if (tag == "csv") return Format::csv;
  if (tag == "json") return Format::json;
  throw ConfigError("unknown format '" + tag + "' (expected csv or json)");
}

std::string extension(Format format) { return format == Format::csv ? ".csv" : ".json"; }

void Table::add_column(std::string name, std::vector<double> values) {
  if (!data.empty() && values.size() != rows())
    throw InvalidArgument("column '" + name + "' length differs from the table");
  columns.push_back(std::move(name));
  data.push_back(std::move(values));
}

const std::vector<double>& Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidArgument("no column '" + name + "'");
  return data[static_cast<std::size_t>(it - columns.begin())];
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericalError("cannot format double");
  return std::string(buf.data(), ptr);
}

void write_table_csv(std::ostream& out, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  std::string row;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    row.clear();
    for (std::size_t c = 0; c < table.data.size(); ++c) {
      if (c) row += ',';
      row += format_double(table.data[c][r]);
    }
    row += '\n';
    out << row;
  }
}

Table read_table_csv(std::istream& in) {
  std::string line;
  if (!getline_stripped(in, line)) throw ParseError("empty table", 1);
  Table table;
  for (auto h : split(line, ',')) {
    table.columns.emplace_back(trim(h));
    table.data.emplace_back();
  }
  std::size_t line_no = 1;
  while (getline_stripped(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != table.columns.size()) throw ParseError("wrong field count", line_no);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto f = trim(fields[c]);
      if (f == "nan") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (f == "inf" || f == "-inf") {
        v = f == "inf" ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      } else if (!parse_double(f, v)) {
        throw ParseError("invalid number in column '" + table.columns[c] + "'", line_no);
      }
      table.data[c].push_back(v);
    }
  }
  return table;
}

Json to_json(const Table& table) {
  Json data = Json::object();
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    Json col = Json::array();
    for (double v : table.data[c]) col.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
    data[table.columns[c]] = std::move(col);
  }
  return Json{{"columns", table.columns}, {"rows", table.rows()}, {"data", std::move(data)}};
}

Table table_from_json(const Json& j) {
  Table table;
  try {
    for (const auto& name : j.at("columns")) {
      std::vector<double> values;
      for (const auto& v : j.at("data").at(name.get<std::string>()))
        values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
      table.add_column(name.get<std::string>(), std::move(values));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed table: ") + e.what(), 0);
  }
  return table;
}

Table trajectory_table(const std::vector<PropagationStep>& trajectory) {
  const auto& names = state_index::names();
  Table table;
  std::vector<double> t;
  for (const auto& s : trajectory) t.push_back(s.t);
  table.add_column("t", std::move(t));
  for (int i = 0; i < state_index::kSize; ++i) {
    std::vector<double> col;
    for (const auto& s : trajectory) col.push_back(s.x.flatten()[i]);
    table.add_column(names[static_cast<std::size_t>(i)], std::move(col));
  }
  for (int i = 0; i < state_index::kSize; ++i) {
    std::vector<double> col;
    for (const auto& s : trajectory) col.push_back(std::sqrt(std::max(0.0, s.P(i, i))));
    table.add_column("sd_" + names[static_cast<std::size_t>(i)], std::move(col));
  }
  return table;
}

Json to_json(const Ellipsoid& e) {
  Json orientation = Json::array();
  for (int r = 0; r < 3; ++r) orientation.push_back(vec_json(e.orientation.row(r).transpose()));
  return Json{{"centroid", vec_json(e.centroid)}, {"semi_axes", vec_json(e.semi_axes)}, {"orientation", orientation}};
}

Ellipsoid ellipsoid_from_json(const Json& j) {
  Ellipsoid e;
  try {
    e.centroid = vec_from_json(j.at("centroid"));
    e.semi_axes = vec_from_json(j.at("semi_axes"));
    const auto& o = j.at("orientation");
    if (!o.is_array() || o.size() != 3) throw ParseError("orientation must be 3x3", 0);
    for (int r = 0; r < 3; ++r) e.orientation.row(r) = vec_from_json(o[static_cast<std::size_t>(r)]).transpose();
  } catch (const Json::exception& ex) {
    throw ParseError(std::string("malformed ellipsoid: ") + ex.what(), 0);
  }
  return e;
}

// --- writers -------------------------------------------------------------------

void write_json(const Json& j, const fs::path& destination) {
  auto out = open_for_write(destination);
  out << j.dump(2) << '\n';
  finish(out, destination);
}

Json read_json(const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw IoError("cannot open " + source.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(source.string() + ": " + e.what(), 0);
  }
}

void write_report(const Table& table, Format format, const fs::path& destination) {
  if (format == Format::json) return write_json(to_json(table), destination);
  auto out = open_for_write(destination);
  write_table_csv(out, table);
  finish(out, destination);
}

void write_report(const DatasetSummary& summary, Format format, const fs::path& destination) {
  if (format == Format::json) return write_json(to_json(summary), destination);
  auto out = open_for_write(destination);
  out << "sensor_id,gyro_bias_rms_dps,gyro_noise_rms_dps,accel_bias_rms_mps2,accel_noise_rms_mps2\n";
  auto row = [&](const std::string& id, double a, double b, double c, double d) {
    out << id << ',' << format_double(a) << ',' << format_double(b) << ',' << format_double(c) << ','
        << format_double(d) << '\n';
  };
  for (const auto& r : summary.sensors)
    row(r.sensor_id, r.gyro_bias_rms, r.gyro_noise_rms, r.accel_bias_rms, r.accel_noise_rms);
  row("min", summary.gyro_bias.min, summary.gyro_noise.min, summary.accel_bias.min, summary.accel_noise.min);
  row("median", summary.gyro_bias.median, summary.gyro_noise.median, summary.accel_bias.median,
      summary.accel_noise.median);
  row("max", summary.gyro_bias.max, summary.gyro_noise.max, summary.accel_bias.max, summary.accel_noise.max);
  finish(out, destination);
}

void write_report(const Ellipsoid& ellipsoid, Format format, const fs::path& destination) {
  if (format == Format::json) return write_json(to_json(ellipsoid), destination);
  auto out = open_for_write(destination);
  out << "field,x,y,z\n";
  auto row = [&](const std::string& name, const Vec3& v) {
    out << name << ',' << format_double(v[0]) << ',' << format_double(v[1]) << ',' << format_double(v[2]) << '\n';
  };
  row("centroid", ellipsoid.centroid);
  row("semi_axes", ellipsoid.semi_axes);
  for (int c = 0; c < 3; ++c) row("axis" + std::to_string(c), ellipsoid.orientation.col(c));
  finish(out, destination);
}

}  // namespace imulab::dataio
