#include "imulab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <set>

#include "CLI11.hpp"

#include "imulab/errors.hpp"
#include "imulab/estimation.hpp"
#include "imulab/rng.hpp"
#include "imulab/units.hpp"

namespace imulab::cli {

namespace fs = std::filesystem;
using dataio::Json;

namespace {

// Reference error ranges of a ten-sensor MEMS array at 100 Hz (min, median, max).
struct ReferenceRange {
  double min, median, max;
};
constexpr ReferenceRange kGyroBiasDps{1.987, 2.164, 2.343};
constexpr ReferenceRange kGyroNoiseDps{0.026, 0.033, 0.038};
constexpr ReferenceRange kAccelBias{0.176, 0.181, 0.197};
constexpr ReferenceRange kAccelNoise{0.007, 0.007, 0.009};

// In-run intensity defaults: a tenth of the median turn-on bias accumulated over 100 s.
constexpr double kInRunGyroDps = 0.1 * 2.164 / 10.0;
constexpr double kInRunAccel = 0.1 * 0.181 / 10.0;

constexpr std::uint64_t kBiasDirectionStream = 0xB1A5D1ECULL;

const std::set<std::string> kConfigKeys = {
    "seed", "duration_s", "rate_hz", "sensors", "gravity_mps2", "manifest", "sensor_params", "profile",
    "tau_grid", "k_grid", "out", "format", "noise_interpretation", "sigma_gyro_bias_dps",
    "sigma_accel_bias_mps2", "inject_bias_walk", "t0_window_s", "gyro_units", "p0_sd"};

Json vec_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Mat3 mat3_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3x3 array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3_from(j[static_cast<std::size_t>(r)], what).transpose();
  return m;
}

Vec3 gyro_vec_to_si(const Vec3& v) {
  return v.unaryExpr([](double x) { return units::deg_to_rad(x); });
}
Vec3 gyro_vec_to_deg(const Vec3& v) {
  return v.unaryExpr([](double x) { return units::rad_to_deg(x); });
}

Vec3 random_direction(Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(unit(rng), unit(rng), unit(rng));
  } while (d.norm() < 1e-12);
  return d.normalized();
}

// Vector whose RMS over its three components equals `rms_value`.
Vec3 vector_with_rms(const Vec3& direction, double rms_value) { return direction * (std::sqrt(3.0) * rms_value); }

double draw(const ReferenceRange& r, Profile profile, Rng& rng) {
  if (profile == Profile::median) return r.median;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

fs::path table_path(const ExperimentConfig& c, const std::string& stem) {
  return c.out / (stem + dataio::extension(c.format));
}

Json ratio_entry(double ratio) {
  Json j{{"ratio", ratio}};
  j["db"] = (ratio > 0.0 && std::isfinite(ratio)) ? Json(db_ratio(ratio)) : Json(nullptr);
  return j;
}

Json evaluation_json(const EvaluationMatrix& m, double to_report_units, const char* unit) {
  const double u = to_report_units;
  return Json{{"units", unit},
              {"cells", Json::array({Json::array({m.single_t0 * u, m.array_t0 * u, m.k_ratio_t0()}),
                                     Json::array({m.single_tf * u, m.array_tf * u, m.k_ratio_tf()}),
                                     Json::array({m.n_ratio_single(), m.n_ratio_array(), m.diagonal_ratio()})})},
              {"ratios", Json{{"k_ratio_t0", ratio_entry(m.k_ratio_t0())},
                              {"k_ratio_tf", ratio_entry(m.k_ratio_tf())},
                              {"n_ratio_single", ratio_entry(m.n_ratio_single())},
                              {"n_ratio_array", ratio_entry(m.n_ratio_array())},
                              {"diagonal", ratio_entry(m.diagonal_ratio())}}}};
}

std::string k_suffix(std::size_t k) { return "_K" + std::to_string(k); }

void require_k_grid(const std::vector<std::size_t>& grid, std::size_t k_max) {
  for (std::size_t k : grid)
    if (k < 1 || k > k_max)
      throw ConfigError("k_grid entry " + std::to_string(k) + " outside [1, " + std::to_string(k_max) + "]");
}

// Per-sensor inputs to error propagation, SI units, worst sensor first.
struct PropagationInputs {
  std::vector<std::string> ids;
  std::vector<Vec6> biases;   // gyro (rad/s) then accel (m/s^2)
  std::vector<double> sigma_gyro;
  std::vector<double> sigma_accel;
  double rate_hz = 0.0;
  double gravity = GravityModel::kDefaultMagnitude;
  std::string source;
};

PropagationInputs inputs_from_estimates(const Json& est) {
  PropagationInputs in;
  in.source = "estimates";
  in.rate_hz = est.at("rate_hz").get<double>();
  in.gravity = est.at("gravity_mps2").get<double>();
  for (const auto& s : est.at("sensors")) {
    Vec6 b;
    b << gyro_vec_to_si(vec3_from(s.at("bias_gyro_dps"), "bias_gyro_dps")),
        vec3_from(s.at("bias_accel_mps2"), "bias_accel_mps2");
    const Vec3 sg = gyro_vec_to_si(vec3_from(s.at("noise_std_gyro_dps"), "noise_std_gyro_dps"));
    const Vec3 sa = vec3_from(s.at("noise_std_accel_mps2"), "noise_std_accel_mps2");
    in.ids.push_back(s.at("sensor_id").get<std::string>());
    in.biases.push_back(b);
    in.sigma_gyro.push_back(std::sqrt(sg.squaredNorm() / 3.0));
    in.sigma_accel.push_back(std::sqrt(sa.squaredNorm() / 3.0));
  }
  return in;
}

PropagationInputs inputs_from_truth(const ExperimentConfig& c) {
  const auto params = synthetic_sensors(c);
  PropagationInputs in;
  in.source = "synthetic_truth";
  in.rate_hz = c.rate_hz;
  in.gravity = c.gravity_mps2;
  const QualityScale scale = default_quality_scale();
  std::vector<std::size_t> order(params.size());
  std::vector<double> scores(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    order[i] = i;
    Vec6 b;
    b << params[i].bias_gyro, params[i].bias_accel;
    scores[i] = quality_score(b, scale);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return default_sensor_id(a) < default_sensor_id(b);
  });
  for (std::size_t i : order) {
    const auto& p = params[i];
    Vec6 b;
    b << p.bias_gyro, p.bias_accel;
    in.ids.push_back(default_sensor_id(i));
    in.biases.push_back(b);
    in.sigma_gyro.push_back(std::sqrt(p.gyro_noise_std().squaredNorm() / 3.0));
    in.sigma_accel.push_back(std::sqrt(p.accel_noise_std().squaredNorm() / 3.0));
  }
  return in;
}

double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

// --- config ----------------------------------------------------------------------

ExperimentConfig::ExperimentConfig()
    : sigma_gyro_bias(units::deg_to_rad(kInRunGyroDps)), sigma_accel_bias(kInRunAccel) {}

void ExperimentConfig::validate() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("duration_s must be positive");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ConfigError("rate_hz must be positive");
  if (sensors < 1) throw ConfigError("sensors must be >= 1");
  if (!std::isfinite(gravity_mps2) || gravity_mps2 < 0.0) throw ConfigError("gravity_mps2 must be >= 0");
  if (manifest && sensor_params) throw ConfigError("config sets both a manifest and synthetic sensor_params");
  if (sensor_params && sensor_params->size() != sensors)
    throw ConfigError("sensor_params length differs from sensors");
  if (!(sigma_gyro_bias >= 0.0) || !(sigma_accel_bias >= 0.0)) throw ConfigError("in-run intensities must be >= 0");
  if (!(t0_window_s > 0.0)) throw ConfigError("t0_window_s must be positive");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!std::isfinite(tau_grid[i]) || tau_grid[i] < 0.0) throw ConfigError("tau_grid entries must be >= 0");
    if (i && tau_grid[i] <= tau_grid[i - 1]) throw ConfigError("tau_grid must be strictly increasing");
  }
  for (std::size_t k : k_grid)
    if (k < 1) throw ConfigError("k_grid entries must be >= 1");
  if (p0_sd && (!p0_sd->allFinite() || p0_sd->minCoeff() < 0.0)) throw ConfigError("p0_sd must be >= 0");
  if (sensor_params)
    for (const auto& p : *sensor_params) p.validate();
}

std::vector<double> ExperimentConfig::effective_tau_grid() const {
  if (!tau_grid.empty()) return tau_grid;
  std::vector<double> grid;
  const auto steps = static_cast<std::size_t>(std::floor(duration_s));
  for (std::size_t i = 0; i <= steps; ++i) grid.push_back(static_cast<double>(i));
  if (grid.back() < duration_s) grid.push_back(duration_s);
  return grid;
}

std::vector<std::size_t> ExperimentConfig::effective_k_grid(std::size_t k_max) const {
  std::vector<std::size_t> grid = k_grid;
  if (grid.empty()) grid = k_max > 1 ? std::vector<std::size_t>{1, k_max} : std::vector<std::size_t>{1};
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Json params_to_json(const SensorErrorParams& p) {
  Json j{{"bias_gyro_dps", vec_json(gyro_vec_to_deg(p.bias_gyro))},
         {"bias_accel_mps2", vec_json(p.bias_accel)},
         {"sigma_gyro_dps", units::rad_to_deg(p.sigma_gyro)},
         {"sigma_accel_mps2", p.sigma_accel},
         {"sigma_gyro_bias_dps", units::rad_to_deg(p.sigma_gyro_bias)},
         {"sigma_accel_bias_mps2", p.sigma_accel_bias}};
  if (p.sigma_gyro_axes) j["sigma_gyro_axes_dps"] = vec_json(gyro_vec_to_deg(*p.sigma_gyro_axes));
  if (p.sigma_accel_axes) j["sigma_accel_axes_mps2"] = vec_json(*p.sigma_accel_axes);
  if (!p.gain_gyro.isZero(0.0) || !p.gain_accel.isZero(0.0)) {
    auto mat = [](const Mat3& m) {
      Json rows = Json::array();
      for (int r = 0; r < 3; ++r) rows.push_back(vec_json(m.row(r).transpose()));
      return rows;
    };
    j["gain_gyro"] = mat(p.gain_gyro);
    j["gain_accel"] = mat(p.gain_accel);
  }
  return j;
}

SensorErrorParams params_from_json(const Json& j) {
  SensorErrorParams p;
  try {
    if (j.contains("bias_gyro_dps")) p.bias_gyro = gyro_vec_to_si(vec3_from(j.at("bias_gyro_dps"), "bias_gyro_dps"));
    if (j.contains("bias_accel_mps2")) p.bias_accel = vec3_from(j.at("bias_accel_mps2"), "bias_accel_mps2");
    p.sigma_gyro = units::deg_to_rad(j.value("sigma_gyro_dps", 0.0));
    p.sigma_accel = j.value("sigma_accel_mps2", 0.0);
    p.sigma_gyro_bias = units::deg_to_rad(j.value("sigma_gyro_bias_dps", 0.0));
    p.sigma_accel_bias = j.value("sigma_accel_bias_mps2", 0.0);
    if (j.contains("sigma_gyro_axes_dps"))
      p.sigma_gyro_axes = gyro_vec_to_si(vec3_from(j.at("sigma_gyro_axes_dps"), "sigma_gyro_axes_dps"));
    if (j.contains("sigma_accel_axes_mps2"))
      p.sigma_accel_axes = vec3_from(j.at("sigma_accel_axes_mps2"), "sigma_accel_axes_mps2");
    if (j.contains("gain_gyro")) p.gain_gyro = mat3_from(j.at("gain_gyro"), "gain_gyro");
    if (j.contains("gain_accel")) p.gain_accel = mat3_from(j.at("gain_accel"), "gain_accel");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed sensor parameters: ") + e.what());
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kConfigKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.duration_s = j.value("duration_s", c.duration_s);
    c.rate_hz = j.value("rate_hz", c.rate_hz);
    c.sensors = j.value("sensors", c.sensors);
    c.gravity_mps2 = j.value("gravity_mps2", c.gravity_mps2);
    if (j.contains("manifest")) c.manifest = fs::path(j.at("manifest").get<std::string>());
    if (j.contains("sensor_params")) {
      std::vector<SensorErrorParams> ps;
      for (const auto& e : j.at("sensor_params")) ps.push_back(params_from_json(e));
      if (!j.contains("sensors")) c.sensors = ps.size();
      c.sensor_params = std::move(ps);
    }
    if (j.contains("profile")) {
      if (c.manifest) throw ConfigError("config sets both a manifest and a synthetic profile");
      const auto tag = j.at("profile").get<std::string>();
      if (tag == "median") c.profile = Profile::median;
      else if (tag == "spread") c.profile = Profile::spread;
      else throw ConfigError("unknown profile '" + tag + "' (expected median or spread)");
    }
    if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    if (j.contains("k_grid")) c.k_grid = j.at("k_grid").get<std::vector<std::size_t>>();
    if (j.contains("tau_grid") && c.tau_grid.empty()) throw ConfigError("tau_grid must not be empty");
    if (j.contains("k_grid") && c.k_grid.empty()) throw ConfigError("k_grid must not be empty");
    if (j.contains("out")) c.out = fs::path(j.at("out").get<std::string>());
    if (j.contains("format")) c.format = dataio::parse_format(j.at("format").get<std::string>());
    if (j.contains("noise_interpretation"))
      c.noise_interpretation = parse_noise_interpretation(j.at("noise_interpretation").get<std::string>());
    if (j.contains("sigma_gyro_bias_dps"))
      c.sigma_gyro_bias = units::deg_to_rad(j.at("sigma_gyro_bias_dps").get<double>());
    c.sigma_accel_bias = j.value("sigma_accel_bias_mps2", c.sigma_accel_bias);
    c.inject_bias_walk = j.value("inject_bias_walk", c.inject_bias_walk);
    c.t0_window_s = j.value("t0_window_s", c.t0_window_s);
    if (j.contains("gyro_units")) c.gyro_unit = units::parse_gyro_unit(j.at("gyro_units").get<std::string>());
    if (j.contains("p0_sd")) {
      const auto v = j.at("p0_sd").get<std::vector<double>>();
      if (v.size() != 15) throw ConfigError("p0_sd must have 15 entries");
      c.p0_sd = Vec15(Eigen::Map<const Vec15>(v.data()));
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j{{"seed", c.seed},
         {"duration_s", c.duration_s},
         {"rate_hz", c.rate_hz},
         {"sensors", c.sensors},
         {"gravity_mps2", c.gravity_mps2}};
  if (c.manifest) {
    j["manifest"] = c.manifest->generic_string();
  } else if (c.sensor_params) {
    Json ps = Json::array();
    for (const auto& p : *c.sensor_params) ps.push_back(params_to_json(p));
    j["sensor_params"] = ps;
  } else {
    j["profile"] = c.profile == Profile::median ? "median" : "spread";
  }
  j["tau_grid"] = c.effective_tau_grid();
  if (!c.k_grid.empty()) j["k_grid"] = c.k_grid;
  j["out"] = c.out.generic_string();
  j["format"] = c.format == dataio::Format::csv ? "csv" : "json";
  j["noise_interpretation"] = to_string(c.noise_interpretation);
  j["sigma_gyro_bias_dps"] = units::rad_to_deg(c.sigma_gyro_bias);
  j["sigma_accel_bias_mps2"] = c.sigma_accel_bias;
  j["inject_bias_walk"] = c.inject_bias_walk;
  j["t0_window_s"] = c.t0_window_s;
  j["gyro_units"] = units::to_string(c.gyro_unit);
  if (c.p0_sd) j["p0_sd"] = std::vector<double>(c.p0_sd->data(), c.p0_sd->data() + 15);
  return j;
}

std::vector<SensorErrorParams> synthetic_sensors(const ExperimentConfig& c) {
  if (c.sensor_params) return *c.sensor_params;
  std::vector<SensorErrorParams> out(c.sensors);
  for (std::size_t k = 0; k < c.sensors; ++k) {
    Rng rng = make_stream(derive_seed(c.seed, kBiasDirectionStream), k);
    auto& p = out[k];
    p.bias_gyro = vector_with_rms(random_direction(rng), units::deg_to_rad(draw(kGyroBiasDps, c.profile, rng)));
    p.bias_accel = vector_with_rms(random_direction(rng), draw(kAccelBias, c.profile, rng));
    p.sigma_gyro = units::deg_to_rad(draw(kGyroNoiseDps, c.profile, rng));
    p.sigma_accel = draw(kAccelNoise, c.profile, rng);
    p.sigma_gyro_bias = c.sigma_gyro_bias;
    p.sigma_accel_bias = c.sigma_accel_bias;
  }
  return out;
}

// --- commands --------------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  if (c.manifest) throw ConfigError("simulate needs a synthetic config, not a manifest");
  const auto params = synthetic_sensors(c);
  const GravityModel gravity(c.gravity_mps2);
  SimulationOptions opts;
  opts.inject_bias_walk = c.inject_bias_walk;
  ArrayRecording array;
  try {
    array = simulate_array(params, gravity, c.duration_s, c.rate_hz, c.seed, opts);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  dataio::save_array(array, c.out, c.gyro_unit, c.gravity_mps2);

  Json truth = Json::array();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Json p = params_to_json(params[k]);
    p["sensor_id"] = array.recordings[k].sensor_id;
    truth.push_back(p);
  }
  dataio::write_json(Json{{"gravity_mps2", c.gravity_mps2}, {"sensors", truth}}, c.out / "truth.json");
  dataio::write_json(to_json(c), c.out / "config.json");
  log << "simulated " << array.n_sensors() << " sensors x " << array.n_time() << " samples -> "
      << c.out.string() << '\n';
  return kOk;
}

int cmd_estimate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const fs::path manifest_path = c.manifest ? *c.manifest : c.out / "manifest.json";
  if (!fs::exists(manifest_path)) {
    log << "error: no recordings found (" << manifest_path.string() << " missing); run simulate first\n";
    return kUsage;
  }
  const dataio::ArrayManifest manifest = dataio::load_manifest(manifest_path);
  const ArrayRecording input = dataio::load_array(manifest_path);
  const GravityModel gravity(manifest.gravity_mps2);
  const std::size_t n = input.n_time();
  const std::size_t k_max = input.n_sensors();
  if (n < 2) throw DataError("recordings need at least two samples");
  const auto k_grid = c.effective_k_grid(k_max);
  require_k_grid(k_grid, k_max);
  const double rate = input.rate_hz();

  const QualityRanking ranking = sort_by_quality(input, gravity);
  const ArrayRecording& ordered = ranking.ordered;
  std::vector<BiasEstimate> estimates;
  for (const auto& rec : ordered.recordings) estimates.push_back(estimate_bias(rec, gravity));
  const dataio::DatasetSummary summary = dataio::dataset_summary(ordered, gravity);
  fs::create_directories(c.out);

  // Per-sensor estimates, report units (gyro deg/s).
  Json sensors = Json::array();
  for (std::size_t i = 0; i < ordered.n_sensors(); ++i) {
    const auto& e = estimates[i];
    const ResidualSeries r = residuals(ordered.recordings[i], gravity);
    Json wss = Json::array();
    for (int axis = 0; axis < 6; ++axis) {
      if (n < 100) break;
      std::vector<double> col(r.col(axis).data(), r.col(axis).data() + r.rows());
      wss.push_back(wss_check(col, 0.01).passed);
    }
    sensors.push_back(Json{{"sensor_id", ordered.recordings[i].sensor_id},
                           {"quality_score", ranking.scores[i]},
                           {"bias_gyro_dps", vec_json(gyro_vec_to_deg(e.bias.head<3>()))},
                           {"bias_accel_mps2", vec_json(e.bias.tail<3>())},
                           {"uncertainty_gyro_dps", vec_json(gyro_vec_to_deg(e.uncertainty.head<3>()))},
                           {"uncertainty_accel_mps2", vec_json(e.uncertainty.tail<3>())},
                           {"noise_std_gyro_dps", vec_json(gyro_vec_to_deg(e.noise_std.head<3>()))},
                           {"noise_std_accel_mps2", vec_json(e.noise_std.tail<3>())},
                           {"wss_passed", wss}});
  }
  dataio::write_json(Json{{"gravity_mps2", manifest.gravity_mps2},
                          {"rate_hz", rate},
                          {"n_time", n},
                          {"n_sensors", k_max},
                          {"sensors", sensors},
                          {"dataset_summary", dataio::to_json(summary)}},
                     c.out / "estimates.json");
  dataio::write_report(summary, c.format, table_path(c, "dataset_summary"));

  // (a) raw and compensated K-averaged series for every K.
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = ordered.recordings.front().samples[i].t;
  static const char* kAxes[] = {"gx", "gy", "gz", "ax", "ay", "az"};
  std::vector<ResidualSeries> compensated(k_max + 1);
  for (std::size_t k = 1; k <= k_max; ++k) {
    ResidualSeries raw = ResidualSeries::Zero(static_cast<Eigen::Index>(n), 6);
    for (std::size_t s = 0; s < k; ++s) raw += residuals(ordered.recordings[s], gravity);
    raw /= static_cast<double>(k);
    compensated[k] = averaged_compensated(ordered, gravity, k);
    dataio::Table table;
    table.add_column("t", t);
    for (int which = 0; which < 2; ++which) {
      const ResidualSeries& src = which == 0 ? raw : compensated[k];
      for (int a = 0; a < 6; ++a) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) {
          double v = src(static_cast<Eigen::Index>(i), a);
          if (a == 5 && which == 0) v -= manifest.gravity_mps2;  // raw series as measured
          col[i] = a < 3 ? units::gyro_from_si(v, units::GyroUnit::deg_per_s) : v;
        }
        table.add_column(std::string(which == 0 ? "raw_" : "comp_") + kAxes[a], std::move(col));
      }
    }
    dataio::write_report(table, c.format, table_path(c, "series" + k_suffix(k)));
  }

  // (b) KDE curves of raw and compensated series, (c) running-std profiles.
  const auto window_ends = log_window_grid(n);
  dataio::Table profile_table;
  {
    std::vector<double> ns, ts;
    for (std::size_t w : window_ends) {
      ns.push_back(static_cast<double>(w));
      ts.push_back(static_cast<double>(w) / rate);
    }
    profile_table.add_column("n", ns);
    profile_table.add_column("t_s", ts);
  }
  for (std::size_t k : k_grid) {
    const ResidualSeries& comp = compensated[k];
    dataio::Table kde_raw, kde_comp;
    for (int a = 0; a < 6; ++a) {
      std::vector<double> comp_col(n), raw_col(n);
      const Vec6 bias_avg = [&] {
        std::vector<Vec6> bs;
        for (std::size_t s = 0; s < k; ++s) bs.push_back(estimates[s].bias);
        return array_bias_average(bs);
      }();
      for (std::size_t i = 0; i < n; ++i) {
        const double cv = comp(static_cast<Eigen::Index>(i), a);
        double rv = cv + bias_avg[a];
        if (a == 5) rv -= manifest.gravity_mps2;
        comp_col[i] = a < 3 ? units::rad_to_deg(cv) : cv;
        raw_col[i] = a < 3 ? units::rad_to_deg(rv) : rv;
      }
      for (int which = 0; which < 2; ++which) {
        const auto& samples = which == 0 ? raw_col : comp_col;
        if (n < 2) break;
        const auto grid = kde_grid(samples, 200);
        auto dens = kde_density(samples, grid);
        auto& table = which == 0 ? kde_raw : kde_comp;
        table.add_column(std::string("x_") + kAxes[a], grid);
        table.add_column(std::string("density_") + kAxes[a], std::move(dens));
      }
    }
    dataio::write_report(kde_raw, c.format, table_path(c, "kde_raw" + k_suffix(k)));
    dataio::write_report(kde_comp, c.format, table_path(c, "kde_comp" + k_suffix(k)));

    std::array<RunningStdProfile, 6> prof;
    std::array<double, 6> sigma_single{};
    for (int a = 0; a < 6; ++a) {
      prof[static_cast<std::size_t>(a)] = running_std_profile(comp.col(a), window_ends);
      double acc = 0.0;
      for (std::size_t s = 0; s < k; ++s) acc += estimates[s].noise_std[a] * estimates[s].noise_std[a];
      sigma_single[static_cast<std::size_t>(a)] = std::sqrt(acc / static_cast<double>(k));
    }
    for (int channel = 0; channel < 2; ++channel) {
      std::vector<double> sd, crlb;
      const double to_units = channel == 0 ? units::rad_to_deg(1.0) : 1.0;
      for (std::size_t w = 0; w < window_ends.size(); ++w) {
        double s2 = 0.0, c2 = 0.0;
        for (int a = channel * 3; a < channel * 3 + 3; ++a) {
          const double v = prof[static_cast<std::size_t>(a)].std_estimates[w];
          s2 += v * v;
          c2 += fisher_crlb(std::max(sigma_single[static_cast<std::size_t>(a)], 1e-300),
                            static_cast<long long>(window_ends[w] * k))
                    .crlb;
        }
        sd.push_back(std::sqrt(s2 / 3.0) * to_units);
        crlb.push_back(std::sqrt(c2 / 3.0) * to_units);
      }
      const std::string tag = channel == 0 ? "gyro" : "accel";
      profile_table.add_column(tag + "_sd" + k_suffix(k), std::move(sd));
      profile_table.add_column(tag + "_crlb" + k_suffix(k), std::move(crlb));
    }
  }
  dataio::write_report(profile_table, c.format, table_path(c, "running_std"));

  // (d) evaluation matrix: K = 1 against the full array.
  const auto t0_window = static_cast<std::size_t>(
      std::clamp(std::round(c.t0_window_s * rate), 2.0, static_cast<double>(n)));
  const EvaluationMatrices em = evaluation_matrices(ordered, gravity, k_max, t0_window);
  dataio::write_json(Json{{"k", em.k},
                          {"n_time", em.n_time},
                          {"t0_window", em.t0_window},
                          {"expected", Json{{"k_ratio", 1.0 / std::sqrt(static_cast<double>(em.k))},
                                            {"n_ratio", 1.0 / std::sqrt(static_cast<double>(em.n_time))},
                                            {"diagonal", 1.0 / std::sqrt(static_cast<double>(em.n_time * em.k))}}},
                          {"gyro", evaluation_json(em.gyro, units::rad_to_deg(1.0), "deg/s")},
                          {"accel", evaluation_json(em.accel, 1.0, "m/s2")}},
                     c.out / "evaluation_matrix.json");
  log << "estimated " << k_max << " sensors x " << n << " samples -> " << c.out.string() << '\n';
  return kOk;
}

int cmd_propagate(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  PropagationInputs in;
  const fs::path est_path = c.out / "estimates.json";
  if (fs::exists(est_path)) {
    try {
      in = inputs_from_estimates(dataio::read_json(est_path));
    } catch (const Json::exception& e) {
      throw DataError(std::string("malformed estimates.json: ") + e.what());
    }
  } else if (!c.manifest) {
    in = inputs_from_truth(c);
  } else {
    log << "error: " << est_path.string() << " missing; run estimate first\n";
    return kUsage;
  }
  if (in.biases.empty()) throw DataError("no sensors to propagate");

  const std::size_t k_max = in.biases.size();
  const auto k_grid = c.effective_k_grid(k_max);
  require_k_grid(k_grid, k_max);
  const auto tau_grid = c.effective_tau_grid();
  if (tau_grid.empty()) throw ConfigError("tau grid is empty");

  const GravityModel gravity(in.gravity);
  const SystemMatrices sys = build_system(gravity);
  const NoiseSpectra single =
      spectra_from_std(std::sqrt(mean_square(in.sigma_accel)), std::sqrt(mean_square(in.sigma_gyro)),
                       c.sigma_accel_bias, c.sigma_gyro_bias, c.noise_interpretation, in.rate_hz);
  Mat15 P0 = Mat15::Zero();
  if (c.p0_sd) P0.diagonal() = c.p0_sd->cwiseAbs2();

  const auto& names = state_index::names();
  fs::create_directories(c.out);
  struct Final {
    KinematicErrors mean;
    Mat15 P;
  };
  std::vector<Final> finals;
  Json per_k = Json::array();
  for (std::size_t k : k_grid) {
    const Vec6 bias = array_bias_average(std::span<const Vec6>(in.biases.data(), k));
    const Vec3 bg = bias.head<3>(), ba = bias.tail<3>();
    dataio::Table mean_table, sd_table;
    mean_table.add_column("t", tau_grid);
    sd_table.add_column("t", tau_grid);
    std::vector<std::vector<double>> mean_cols(9), sd_cols(9);
    Final last{};
    for (double tau : tau_grid) {
      const KinematicErrors e = propagate_mean(ba, bg, sys, tau);
      const Mat15 phi = phi_closed(sys, tau);
      const Mat15 P = phi * P0 * phi.transpose() +
                      array_q_scale(q_closed(sys, single, tau), static_cast<long long>(k));
      Vec15 x = Vec15::Zero();
      x << e.dp, e.dv, e.eps, Vec3::Zero(), Vec3::Zero();
      for (int i = 0; i < 9; ++i) {
        mean_cols[static_cast<std::size_t>(i)].push_back(std::abs(x[i]));
        sd_cols[static_cast<std::size_t>(i)].push_back(std::sqrt(std::max(0.0, P(i, i))));
      }
      last = {e, P};
    }
    for (int i = 0; i < 9; ++i) {
      mean_table.add_column(names[static_cast<std::size_t>(i)], std::move(mean_cols[static_cast<std::size_t>(i)]));
      sd_table.add_column("sd_" + names[static_cast<std::size_t>(i)], std::move(sd_cols[static_cast<std::size_t>(i)]));
    }
    dataio::write_report(mean_table, c.format, table_path(c, "mean_error" + k_suffix(k)));
    dataio::write_report(sd_table, c.format, table_path(c, "uncertainty" + k_suffix(k)));
    const Ellipsoid ell = ellipsoid_from_cov(last.P.block<3, 3>(0, 0), last.mean.dp);
    dataio::write_report(ell, dataio::Format::json, c.out / ("ellipsoid" + k_suffix(k) + ".json"));
    finals.push_back(last);
    per_k.push_back(Json{{"k", k},
                         {"bias_gyro_dps", vec_json(gyro_vec_to_deg(bg))},
                         {"bias_accel_mps2", vec_json(ba)},
                         {"final_dp", vec_json(last.mean.dp)},
                         {"final_dv", vec_json(last.mean.dv)},
                         {"final_eps", vec_json(last.mean.eps)},
                         {"ellipsoid", dataio::to_json(ell)}});
  }

  // Ratio matrices (rows p, v, eps; columns x, y, z) between the largest and smallest K.
  const Final& lo = finals.front();
  const Final& hi = finals.back();
  Json mean_ratio = Json::array(), sd_ratio = Json::array();
  for (int row = 0; row < 3; ++row) {
    const Vec3 lo_mean = row == 0 ? lo.mean.dp : row == 1 ? lo.mean.dv : lo.mean.eps;
    const Vec3 hi_mean = row == 0 ? hi.mean.dp : row == 1 ? hi.mean.dv : hi.mean.eps;
    Json mr = Json::array(), sr = Json::array();
    for (int col = 0; col < 3; ++col) {
      const int idx = row * 3 + col;
      mr.push_back(lo_mean[col] != 0.0 ? Json(std::abs(hi_mean[col] / lo_mean[col])) : Json(nullptr));
      sr.push_back(lo.P(idx, idx) > 0.0 ? Json(std::sqrt(hi.P(idx, idx) / lo.P(idx, idx))) : Json(nullptr));
    }
    mean_ratio.push_back(mr);
    sd_ratio.push_back(sr);
  }

  Json discrepancies = Json::array();
  for (const auto& d : audit_q_coefficients(sys)) {
    discrepancies.push_back(Json{{"block", d.block},
                                 {"channel", d.channel},
                                 {"printed_relative_error", d.printed_relative_error},
                                 {"resolved_relative_error", d.resolved_relative_error},
                                 {"note", d.note}});
  }

  dataio::write_json(Json{{"source", in.source},
                          {"gravity_mps2", in.gravity},
                          {"rate_hz", in.rate_hz},
                          {"noise_interpretation", to_string(c.noise_interpretation)},
                          {"spectra_single", Json{{"s_a", single.s_a}, {"s_g", single.s_g},
                                                  {"s_ab", single.s_ab}, {"s_gb", single.s_gb}}},
                          {"k_grid", k_grid},
                          {"tau_final", tau_grid.back()},
                          {"per_k", per_k},
                          {"ratio_k", Json::array({k_grid.front(), k_grid.back()})},
                          {"mean_error_ratio", mean_ratio},
                          {"uncertainty_ratio", sd_ratio},
                          {"q_coefficient_discrepancies", discrepancies}},
                     c.out / "propagation.json");
  log << "propagated K in {" << k_grid.front() << ".." << k_grid.back() << "} to tau = " << tau_grid.back()
      << " s -> " << c.out.string() << '\n';
  return kOk;
}

int cmd_report(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const fs::path est = c.out / "estimates.json";
  const fs::path eval = c.out / "evaluation_matrix.json";
  const fs::path prop = c.out / "propagation.json";
  for (const auto& p : {est, eval}) {
    if (!fs::exists(p)) {
      log << "error: " << p.string() << " missing; run estimate first\n";
      return kUsage;
    }
  }
  const Json estimates = dataio::read_json(est);
  const Json matrix = dataio::read_json(eval);

  Json db = Json::object();
  for (const char* channel : {"gyro", "accel"}) {
    Json ch = Json::object();
    for (const auto& [name, entry] : matrix.at(channel).at("ratios").items()) ch[name] = entry.at("db");
    db[channel] = ch;
  }

  Json report{{"software", Json{{"name", "imulab"}, {"version", version()}}},
              {"config", to_json(c)},
              {"gravity_mps2", estimates.at("gravity_mps2")},
              {"dataset_summary", estimates.at("dataset_summary")},
              {"evaluation_matrix", matrix},
              {"db_ratios", db}};
  if (fs::exists(prop)) {
    const Json propagation = dataio::read_json(prop);
    report["propagation"] = Json{{"noise_interpretation", propagation.at("noise_interpretation")},
                                 {"ratio_k", propagation.at("ratio_k")},
                                 {"mean_error_ratio", propagation.at("mean_error_ratio")},
                                 {"uncertainty_ratio", propagation.at("uncertainty_ratio")}};
    report["q_coefficient_discrepancies"] = propagation.at("q_coefficient_discrepancies");
  } else {
    Json discrepancies = Json::array();
    for (const auto& d : audit_q_coefficients(build_system(GravityModel(estimates.at("gravity_mps2").get<double>())))) {
      discrepancies.push_back(Json{{"block", d.block},
                                   {"channel", d.channel},
                                   {"printed_relative_error", d.printed_relative_error},
                                   {"resolved_relative_error", d.resolved_relative_error},
                                   {"note", d.note}});
    }
    report["q_coefficient_discrepancies"] = discrepancies;
  }
  dataio::write_json(report, c.out / "report.json");
  log << "report -> " << (c.out / "report.json").string() << '\n';
  return kOk;
}

// --- entry point -----------------------------------------------------------------

std::string version() { return IMULAB_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stationary multi-IMU array simulation, estimation and error propagation", "imulab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  std::string config_path, out_dir, format;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sensors;
  std::optional<double> rate, duration;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--sensors", sensors, "number of sensors K");
    sub->add_option("--rate", rate, "sample rate [Hz]");
    sub->add_option("--duration", duration, "recording duration [s]");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  };
  auto* simulate = app.add_subcommand("simulate", "simulate a stationary sensor array");
  auto* estimate = app.add_subcommand("estimate", "estimate biases, noise levels and scaling ratios");
  auto* propagate = app.add_subcommand("propagate", "propagate mean errors and covariances");
  auto* report = app.add_subcommand("report", "bundle prior outputs into report.json");
  for (auto* sub : {simulate, estimate, propagate, report}) add_common(sub);

  std::vector<const char*> argv{"imulab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    Json j = Json::object();
    if (!config_path.empty()) {
      try {
        j = dataio::read_json(config_path);
      } catch (const IoError& e) {
        throw ConfigError(e.what());
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
    }
    if (seed) j["seed"] = *seed;
    if (sensors) j["sensors"] = *sensors;
    if (rate) j["rate_hz"] = *rate;
    if (duration) j["duration_s"] = *duration;
    if (!out_dir.empty()) j["out"] = out_dir;
    if (!format.empty()) j["format"] = format;
    const ExperimentConfig config = config_from_json(j);

    if (simulate->parsed()) return cmd_simulate(config, err);
    if (estimate->parsed()) return cmd_estimate(config, err);
    if (propagate->parsed()) return cmd_propagate(config, err);
    return cmd_report(config, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace imulab::cli
