#include "imulab/ins_error_model.hpp"

#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "imulab/errors.hpp"
#include "imulab/kernels.hpp"

namespace imulab {

namespace {

using state_index::kAccelBias;
using state_index::kGyroBias;
using state_index::kMisalignment;
using state_index::kPosition;
using state_index::kVelocity;

void check_tau(double tau) {
  if (!std::isfinite(tau) || tau < 0.0) throw InvalidArgument("tau must be finite and non-negative");
}

auto block(Mat15& m, int row, int col) { return m.block<3, 3>(row, col); }

// Fills the symmetric counterpart of an upper block.
void set_sym(Mat15& m, int row, int col, const Mat3& value) {
  m.block<3, 3>(row, col) = value;
  m.block<3, 3>(col, row) = value.transpose();
}

constexpr std::array<int, 5> kBlockStarts = {kPosition, kVelocity, kMisalignment, kAccelBias, kGyroBias};
constexpr std::array<const char*, 5> kBlockTags = {"p", "v", "eps", "ba", "bg"};

}  // namespace

const std::vector<std::string>& state_index::names() {
  static const std::vector<std::string> names = {
      "dp_x",  "dp_y",  "dp_z",  "dv_x", "dv_y", "dv_z", "eps_x", "eps_y",
      "eps_z", "ba_x", "ba_y", "ba_z", "bg_x", "bg_y", "bg_z"};
  return names;
}

Vec15 ErrorState::flatten() const {
  Vec15 x;
  x << dp, dv, eps, ba, bg;
  return x;
}

ErrorState ErrorState::from_vector(const Vec15& x) {
  ErrorState s;
  s.dp = x.segment<3>(kPosition);
  s.dv = x.segment<3>(kVelocity);
  s.eps = x.segment<3>(kMisalignment);
  s.ba = x.segment<3>(kAccelBias);
  s.bg = x.segment<3>(kGyroBias);
  return s;
}

void NoiseSpectra::validate() const {
  for (double v : {s_a, s_g, s_ab, s_gb}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("noise spectra must be non-negative");
  }
}

NoiseSpectra NoiseSpectra::scaled(double factor) const {
  return {s_a * factor, s_g * factor, s_ab * factor, s_gb * factor};
}

std::string to_string(NoiseInterpretation mode) {
  return mode == NoiseInterpretation::psd_direct ? "psd_direct" : "discrete_per_sample";
}

NoiseInterpretation parse_noise_interpretation(const std::string& tag) {
  if (tag == "psd_direct") return NoiseInterpretation::psd_direct;
  if (tag == "discrete_per_sample") return NoiseInterpretation::discrete_per_sample;
  throw ConfigError("unknown noise interpretation '" + tag +
                    "' (expected psd_direct or discrete_per_sample)");
}

NoiseSpectra spectra_from_std(double sigma_a, double sigma_g, double sigma_ab, double sigma_gb,
                              NoiseInterpretation mode, double rate_hz) {
  NoiseSpectra s{sigma_a * sigma_a, sigma_g * sigma_g, sigma_ab * sigma_ab, sigma_gb * sigma_gb};
  s.validate();
  if (mode == NoiseInterpretation::discrete_per_sample) {
    if (!(rate_hz > 0.0)) throw InvalidArgument("rate must be positive");
    // Only the white measurement noise is a per-sample quantity; in-run
    // intensities are already continuous.
    s.s_a /= rate_hz;
    s.s_g /= rate_hz;
  }
  return s;
}

SystemMatrices build_system(const GravityModel& gravity) {
  const double g = gravity.g_magnitude();
  SystemMatrices sys;
  sys.F23 << 0.0, -g, 0.0,
             g, 0.0, 0.0,
             0.0, 0.0, 0.0;
  const Mat3 I = Mat3::Identity();
  block(sys.F, kPosition, kVelocity) = I;
  block(sys.F, kVelocity, kMisalignment) = sys.F23;
  block(sys.F, kVelocity, kAccelBias) = I;
  block(sys.F, kMisalignment, kGyroBias) = I;

  sys.G.block<3, 3>(kVelocity, 0) = I;
  sys.G.block<3, 3>(kMisalignment, 3) = I;
  sys.G.block<3, 3>(kAccelBias, 6) = I;
  sys.G.block<3, 3>(kGyroBias, 9) = I;
  return sys;
}

Mat15 phi_closed(const SystemMatrices& sys, double tau) {
  check_tau(tau);
  const Mat3 I = Mat3::Identity();
  const Mat3& F23 = sys.F23;
  const double t2 = tau * tau, t3 = t2 * tau;
  Mat15 phi = Mat15::Identity();
  block(phi, kPosition, kVelocity) = I * tau;
  block(phi, kPosition, kMisalignment) = 0.5 * t2 * F23;
  block(phi, kPosition, kAccelBias) = 0.5 * t2 * I;
  block(phi, kPosition, kGyroBias) = (t3 / 6.0) * F23;
  block(phi, kVelocity, kMisalignment) = tau * F23;
  block(phi, kVelocity, kAccelBias) = tau * I;
  block(phi, kVelocity, kGyroBias) = 0.5 * t2 * F23;
  block(phi, kMisalignment, kGyroBias) = tau * I;
  return phi;
}

QCoefficients QCoefficients::printed() {
  QCoefficients c{};
  c.pp_gb7 = 1.0 / 252.0;
  c.pp_g5 = 1.0 / 20.0;
  c.pp_ab5 = 1.0 / 20.0;
  c.pp_a3 = 1.0 / 3.0;
  c.vv_gb5 = 1.0 / 20.0;
  c.vv_g3 = 1.0 / 3.0;
  c.vv_ab3 = 1.0 / 3.0;
  c.vv_a1 = 1.0 / 2.0;
  c.ee_gb3 = 1.0 / 3.0;
  c.ee_g1 = 1.0;
  c.pv_gb6 = 1.0 / 72.0;
  c.pv_g4 = 1.0 / 8.0;
  c.pv_ab4 = 1.0 / 8.0;
  c.pv_a2 = 1.0 / 2.0;
  c.pe_gb5 = 1.0 / 30.0;
  c.pe_g3 = 1.0 / 6.0;
  c.ve_gb4 = 1.0 / 8.0;
  c.ve_g2 = 1.0 / 2.0;
  c.pba_ab3 = 1.0 / 6.0;
  c.vba_ab2 = 1.0 / 2.0;
  c.baba_ab1 = 1.0;
  c.pbg_gb4 = 1.0 / 24.0;
  c.vbg_gb3 = 1.0 / 6.0;
  c.ebg_gb2 = 1.0 / 2.0;
  c.bgbg_gb1 = 1.0;
  return c;
}

QCoefficients QCoefficients::resolved() {
  QCoefficients c = printed();
  // White accel noise enters dv directly: the integral of s_a over [0, tau] is s_a tau.
  c.vv_a1 = 1.0;
  return c;
}

CovarianceMatrix q_from_coefficients(const SystemMatrices& sys, const NoiseSpectra& spectra,
                                     double tau, const QCoefficients& c) {
  check_tau(tau);
  spectra.validate();
  const Mat3 I = Mat3::Identity();
  const Mat3& F = sys.F23;
  const Mat3 FF = F * F.transpose();
  const double t = tau, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, t6 = t5 * t, t7 = t6 * t;
  const double sa = spectra.s_a, sg = spectra.s_g, sab = spectra.s_ab, sgb = spectra.s_gb;

  CovarianceMatrix q = CovarianceMatrix::Zero();
  set_sym(q, kPosition, kPosition,
          c.pp_gb7 * sgb * t7 * FF + (c.pp_g5 * sg * FF + c.pp_ab5 * sab * I) * t5 + c.pp_a3 * sa * t3 * I);
  set_sym(q, kVelocity, kVelocity,
          c.vv_gb5 * sgb * t5 * FF + (c.vv_g3 * sg * FF + c.vv_ab3 * sab * I) * t3 + c.vv_a1 * sa * t * I);
  set_sym(q, kMisalignment, kMisalignment, (c.ee_gb3 * sgb * t3 + c.ee_g1 * sg * t) * I);
  set_sym(q, kPosition, kVelocity,
          c.pv_gb6 * sgb * t6 * FF + (c.pv_g4 * sg * FF + c.pv_ab4 * sab * I) * t4 + c.pv_a2 * sa * t2 * I);
  set_sym(q, kPosition, kMisalignment, (c.pe_gb5 * sgb * t5 + c.pe_g3 * sg * t3) * F);
  set_sym(q, kVelocity, kMisalignment, (c.ve_gb4 * sgb * t4 + c.ve_g2 * sg * t2) * F);
  set_sym(q, kPosition, kAccelBias, c.pba_ab3 * sab * t3 * I);
  set_sym(q, kVelocity, kAccelBias, c.vba_ab2 * sab * t2 * I);
  set_sym(q, kAccelBias, kAccelBias, c.baba_ab1 * sab * t * I);
  set_sym(q, kPosition, kGyroBias, c.pbg_gb4 * sgb * t4 * F);
  set_sym(q, kVelocity, kGyroBias, c.vbg_gb3 * sgb * t3 * F);
  set_sym(q, kMisalignment, kGyroBias, c.ebg_gb2 * sgb * t2 * I);
  set_sym(q, kGyroBias, kGyroBias, c.bgbg_gb1 * sgb * t * I);
  return q;
}

CovarianceMatrix q_closed(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau) {
  return q_from_coefficients(sys, spectra, tau, QCoefficients::resolved());
}

CovarianceMatrix q_numeric_oracle(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau,
                                  int steps) {
  check_tau(tau);
  spectra.validate();
  if (steps < 100) throw InvalidArgument("quadrature needs at least 100 steps");
  if (tau == 0.0) return CovarianceMatrix::Zero();
  return kernels::omp::simpson_q(sys, spectra, tau, steps);
}

std::vector<CoefficientDiscrepancy> audit_q_coefficients(const SystemMatrices& sys, double tau,
                                                         double tolerance) {
  check_tau(tau);
  if (!(tau > 0.0)) throw InvalidArgument("audit needs tau > 0");
  struct Channel {
    const char* name;
    NoiseSpectra spectra;
  };
  const std::array<Channel, 4> channels = {{{"s_a", {1.0, 0.0, 0.0, 0.0}},
                                            {"s_g", {0.0, 1.0, 0.0, 0.0}},
                                            {"s_ab", {0.0, 0.0, 1.0, 0.0}},
                                            {"s_gb", {0.0, 0.0, 0.0, 1.0}}}};
  std::vector<CoefficientDiscrepancy> out;
  for (const auto& ch : channels) {
    const Mat15 oracle = q_numeric_oracle(sys, ch.spectra, tau, 2000);
    const Mat15 printed = q_from_coefficients(sys, ch.spectra, tau, QCoefficients::printed());
    const Mat15 resolved = q_from_coefficients(sys, ch.spectra, tau, QCoefficients::resolved());
    for (std::size_t i = 0; i < kBlockStarts.size(); ++i) {
      for (std::size_t j = i; j < kBlockStarts.size(); ++j) {
        const int r = kBlockStarts[i], c = kBlockStarts[j];
        const Mat3 ob = oracle.block<3, 3>(r, c);
        const double scale = std::max(ob.norm(), 1e-300);
        const double printed_err = (printed.block<3, 3>(r, c) - ob).norm() / scale;
        if (printed_err <= tolerance) continue;
        CoefficientDiscrepancy d;
        d.block = std::string("Q_") + kBlockTags[i] + kBlockTags[j];
        d.channel = ch.name;
        d.printed_relative_error = printed_err;
        d.resolved_relative_error = (resolved.block<3, 3>(r, c) - ob).norm() / scale;
        d.note = "printed coefficient disagrees with quadrature; quadrature value used";
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

double semigroup_check(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau1,
                       double tau2) {
  const Mat15 total = q_closed(sys, spectra, tau1 + tau2);
  const Mat15 phi2 = phi_closed(sys, tau2);
  const Mat15 composed = phi2 * q_closed(sys, spectra, tau1) * phi2.transpose() + q_closed(sys, spectra, tau2);
  const double norm = total.norm();
  if (norm == 0.0) return (composed - total).norm();
  return (composed - total).norm() / norm;
}

KinematicErrors propagate_mean(const Vec3& bias_accel, const Vec3& bias_gyro,
                               const SystemMatrices& sys, double tau) {
  check_tau(tau);
  const double t2 = tau * tau, t3 = t2 * tau;
  KinematicErrors e;
  e.dp = 0.5 * t2 * bias_accel + (t3 / 6.0) * (sys.F23 * bias_gyro);
  e.dv = tau * bias_accel + 0.5 * t2 * (sys.F23 * bias_gyro);
  e.eps = tau * bias_gyro;
  return e;
}

std::vector<PropagationStep> propagate_discrete(const ErrorState& x0, const CovarianceMatrix& P0,
                                                const SystemMatrices& sys,
                                                const NoiseSpectra& spectra, double dt,
                                                std::size_t n_steps) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (n_steps < 1) throw InvalidArgument("n_steps must be >= 1");
  const Mat15 phi = phi_closed(sys, dt);
  const Mat15 q = q_closed(sys, spectra, dt);

  std::vector<PropagationStep> traj;
  traj.reserve(n_steps + 1);
  Vec15 x = x0.flatten();
  Mat15 P = P0;
  traj.push_back({0.0, x0, P});
  for (std::size_t k = 1; k <= n_steps; ++k) {
    x = phi * x;
    P = phi * P * phi.transpose() + q;
    P = 0.5 * (P + P.transpose()).eval();
    traj.push_back({static_cast<double>(k) * dt, ErrorState::from_vector(x), P});
  }
  return traj;
}

Vec6 array_bias_average(std::span<const Vec6> biases) {
  if (biases.empty()) throw InvalidArgument("array_bias_average needs at least one sensor");
  Vec6 sum = Vec6::Zero();
  for (const auto& b : biases) sum += b;
  return sum / static_cast<double>(biases.size());
}

CovarianceMatrix array_q_scale(const CovarianceMatrix& q_single, long long k) {
  if (k < 1) throw InvalidArgument("sensor count must be >= 1");
  return q_single / static_cast<double>(k);
}

Ellipsoid ellipsoid_from_cov(const Mat3& p_block, const Vec3& centroid) {
  if (!p_block.allFinite() || !centroid.allFinite()) throw InvalidArgument("ellipsoid input must be finite");
  const double scale = std::max(p_block.cwiseAbs().maxCoeff(), 1e-300);
  if ((p_block - p_block.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("covariance block is not symmetric");
  const Mat3 sym = 0.5 * (p_block + p_block.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
  const Vec3 values = solver.eigenvalues();  // ascending
  if (values[0] < -1e-10 * std::max(std::abs(sym.trace()), 1e-300))
    throw InvalidArgument("covariance block is indefinite");

  Ellipsoid e;
  e.centroid = centroid;
  Mat3 vecs;
  for (int i = 0; i < 3; ++i) {
    e.semi_axes[i] = std::sqrt(std::max(0.0, values[2 - i]));
    vecs.col(i) = solver.eigenvectors().col(2 - i);
  }
  for (int i = 0; i < 2; ++i) {
    Eigen::Index idx;
    vecs.col(i).cwiseAbs().maxCoeff(&idx);
    if (vecs(idx, i) < 0.0) vecs.col(i) = -vecs.col(i);
  }
  vecs.col(2) = vecs.col(0).cross(vecs.col(1));
  e.orientation = vecs;
  return e;
}

bool is_symmetric_psd(const Mat15& m, double sym_tol, double psd_tol) {
  if (!m.allFinite()) return false;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Mat15> solver(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff() >= -psd_tol * std::abs(m.trace());
}

double relative_frobenius(const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& b) {
  const double nb = b.norm();
  const double diff = (a - b).norm();
  return nb == 0.0 ? diff : diff / nb;
}

}  // namespace imulab
