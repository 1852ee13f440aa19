#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "imulab/sensor_model.hpp"

namespace imulab {

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15x12 = Eigen::Matrix<double, 15, 12>;

// Error-state layout: position, velocity, misalignment, accel bias, gyro bias.
namespace state_index {
inline constexpr int kPosition = 0;
inline constexpr int kVelocity = 3;
inline constexpr int kMisalignment = 6;
inline constexpr int kAccelBias = 9;
inline constexpr int kGyroBias = 12;
inline constexpr int kSize = 15;
/// "dp_x", "dp_y", ..., "bg_z" in index order.
const std::vector<std::string>& names();
}  // namespace state_index

struct ErrorState {
  Vec3 dp = Vec3::Zero();   ///< m
  Vec3 dv = Vec3::Zero();   ///< m/s
  Vec3 eps = Vec3::Zero();  ///< rad
  Vec3 ba = Vec3::Zero();   ///< m/s^2
  Vec3 bg = Vec3::Zero();   ///< rad/s

  Vec15 flatten() const;
  static ErrorState from_vector(const Vec15& x);
};

struct SystemMatrices {
  Mat15 F = Mat15::Zero();
  Mat3 F23 = Mat3::Zero();   ///< [g^n x]
  Mat15x12 G = Mat15x12::Zero();
};

/// Continuous white-noise intensities substituted into the diagonal PSD of
/// (w_a, w_g, w_ab, w_gb).
struct NoiseSpectra {
  double s_a = 0.0;
  double s_g = 0.0;
  double s_ab = 0.0;
  double s_gb = 0.0;

  void validate() const;
  NoiseSpectra scaled(double factor) const;
};

/// How per-sample noise std values become spectra.
enum class NoiseInterpretation {
  psd_direct,           ///< s = sigma^2 (the substitution used by the closed-form model)
  discrete_per_sample,  ///< s = sigma^2 / f_s (std of samples taken at rate f_s)
};

std::string to_string(NoiseInterpretation mode);
NoiseInterpretation parse_noise_interpretation(const std::string& tag);

NoiseSpectra spectra_from_std(double sigma_a, double sigma_g, double sigma_ab, double sigma_gb,
                              NoiseInterpretation mode, double rate_hz);

using CovarianceMatrix = Mat15;

SystemMatrices build_system(const GravityModel& gravity);

/// exp(F tau) as the explicit block matrix; exact because F^4 = 0.
Mat15 phi_closed(const SystemMatrices& sys, double tau);

/// Closed-form process-noise covariance Q(tau), block by block.
CovarianceMatrix q_closed(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau);

/// Composite Simpson quadrature of the integral of Phi G S G^T Phi^T over [0, tau].
/// `steps` must be >= 100; odd counts are rounded up to the next even number.
CovarianceMatrix q_numeric_oracle(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau,
                                  int steps);

/// Polynomial coefficients of every Q(tau) term. `printed()` reproduces the
/// published block formulas literally, `resolved()` is what q_closed uses.
struct QCoefficients {
  double pp_gb7, pp_g5, pp_ab5, pp_a3;
  double vv_gb5, vv_g3, vv_ab3, vv_a1;
  double ee_gb3, ee_g1;
  double pv_gb6, pv_g4, pv_ab4, pv_a2;
  double pe_gb5, pe_g3;
  double ve_gb4, ve_g2;
  double pba_ab3, vba_ab2, baba_ab1;
  double pbg_gb4, vbg_gb3, ebg_gb2, bgbg_gb1;

  static QCoefficients printed();
  static QCoefficients resolved();
};

CovarianceMatrix q_from_coefficients(const SystemMatrices& sys, const NoiseSpectra& spectra,
                                     double tau, const QCoefficients& coeffs);

struct CoefficientDiscrepancy {
  std::string block;    ///< e.g. "Q_vv"
  std::string channel;  ///< "s_a", "s_g", "s_ab" or "s_gb"
  double printed_relative_error = 0.0;  ///< ||printed - quadrature||_F / ||quadrature||_F
  double resolved_relative_error = 0.0;
  std::string note;
};

/// Compares every printed block, one noise channel at a time, against quadrature
/// at `tau` and lists the blocks whose printed form disagrees by more than
/// `tolerance` (relative Frobenius).
std::vector<CoefficientDiscrepancy> audit_q_coefficients(const SystemMatrices& sys, double tau = 1.0,
                                                         double tolerance = 1e-8);

/// ||Q(t1+t2) - (Phi(t2) Q(t1) Phi(t2)^T + Q(t2))||_F / ||Q(t1+t2)||_F (0 when Q vanishes).
double semigroup_check(const SystemMatrices& sys, const NoiseSpectra& spectra, double tau1,
                       double tau2);

struct KinematicErrors {
  Vec3 dp = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
  Vec3 eps = Vec3::Zero();
};

/// Mean error growth from zero initial kinematics driven by constant biases.
KinematicErrors propagate_mean(const Vec3& bias_accel, const Vec3& bias_gyro,
                               const SystemMatrices& sys, double tau);

struct PropagationStep {
  double t = 0.0;
  ErrorState x;
  CovarianceMatrix P = CovarianceMatrix::Zero();
};

/// x_{k+1} = Phi(dt) x_k, P_{k+1} = Phi(dt) P_k Phi(dt)^T + Q(dt).
/// Returns n_steps + 1 entries, the first being (x0, P0) at t = 0.
std::vector<PropagationStep> propagate_discrete(const ErrorState& x0, const CovarianceMatrix& P0,
                                                const SystemMatrices& sys,
                                                const NoiseSpectra& spectra, double dt,
                                                std::size_t n_steps);

/// Component-wise mean of per-sensor bias vectors (gyro first, then accel, as in Vec6
/// residual order).
Vec6 array_bias_average(std::span<const Vec6> biases);

/// Q / k.
CovarianceMatrix array_q_scale(const CovarianceMatrix& q_single, long long k);

struct Ellipsoid {
  Vec3 centroid = Vec3::Zero();
  Vec3 semi_axes = Vec3::Zero();        ///< descending
  Mat3 orientation = Mat3::Identity();  ///< columns = principal directions
};

/// One-sigma ellipsoid of a 3x3 position covariance.
Ellipsoid ellipsoid_from_cov(const Mat3& p_block, const Vec3& centroid);

/// Symmetric to `sym_tol` (relative to max |entry|) and min eigenvalue >= -psd_tol * trace.
bool is_symmetric_psd(const Mat15& m, double sym_tol = 1e-12, double psd_tol = 1e-10);

/// Relative Frobenius distance ||a - b|| / ||b|| (absolute when b is zero).
double relative_frobenius(const Eigen::Ref<const Eigen::MatrixXd>& a,
                          const Eigen::Ref<const Eigen::MatrixXd>& b);

}  // namespace imulab
