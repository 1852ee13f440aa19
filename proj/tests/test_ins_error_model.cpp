#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "imulab/errors.hpp"
#include "imulab/ins_error_model.hpp"
#include "imulab/numeric.hpp"
#include "imulab/units.hpp"

using namespace imulab;

namespace {

// Matrix exponential of a nilpotent F via the terminating power series.
Mat15 series_phi(const Mat15& F, double tau) {
  Mat15 out = Mat15::Identity(), term = Mat15::Identity();
  for (int i = 1; i <= 3; ++i) {
    term = term * F * tau / static_cast<double>(i);
    out += term;
  }
  return out;
}

// The integrand is a degree-6 polynomial in s, so 4-point Gauss-Legendre on each
// panel integrates it exactly.
Mat15 gauss_q(const SystemMatrices& sys, const NoiseSpectra& s, double tau, int panels = 4) {
  const double x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  const double w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  Eigen::Matrix<double, 12, 12> S = Eigen::Matrix<double, 12, 12>::Zero();
  S.diagonal() << Eigen::Vector3d::Constant(s.s_a), Eigen::Vector3d::Constant(s.s_g),
      Eigen::Vector3d::Constant(s.s_ab), Eigen::Vector3d::Constant(s.s_gb);
  Mat15 q = Mat15::Zero();
  const double h = tau / panels;
  for (int p = 0; p < panels; ++p)
    for (int i = 0; i < 4; ++i) {
      const double t = h * p + 0.5 * h * (x[i] + 1.0);
      const Mat15 phi = series_phi(sys.F, t);
      q += 0.5 * h * w[i] * phi * sys.G * S * sys.G.transpose() * phi.transpose();
    }
  return q;
}

NoiseSpectra median_spectra() {
  return spectra_from_std(0.007, units::deg_to_rad(0.033), 0.00181, units::deg_to_rad(0.02164),
                          NoiseInterpretation::psd_direct, 100.0);
}

// RK4 integration of x' = F x from the bias-only initial state.
Vec15 rk4_mean(const SystemMatrices& sys, const Vec3& ba, const Vec3& bg, double tau, int steps) {
  Vec15 x = Vec15::Zero();
  x.segment<3>(state_index::kAccelBias) = ba;
  x.segment<3>(state_index::kGyroBias) = bg;
  const double h = tau / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec15 k1 = sys.F * x;
    const Vec15 k2 = sys.F * (x + 0.5 * h * k1);
    const Vec15 k3 = sys.F * (x + 0.5 * h * k2);
    const Vec15 k4 = sys.F * (x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST(BuildSystem, GravityBlock) {
  const auto sys = build_system(GravityModel(9.81));
  EXPECT_EQ(sys.F23(1, 0), 9.81);
  EXPECT_EQ(sys.F23(0, 1), -9.81);
  EXPECT_EQ(sys.F23.cwiseAbs().sum(), 2 * 9.81);
  EXPECT_EQ((sys.F23 + sys.F23.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sys.F23.row(2).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(sys.F23.col(2).cwiseAbs().sum(), 0.0);
}

TEST(BuildSystem, Nilpotent) {
  const auto sys = build_system(GravityModel());
  const Mat15 f2 = sys.F * sys.F;
  EXPECT_GT(f2.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((f2 * sys.F).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((f2 * f2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildSystem, ShapingMatrixLayout) {
  const auto sys = build_system(GravityModel());
  EXPECT_EQ(sys.G.topRows(3).cwiseAbs().sum(), 0.0);
  for (int b = 0; b < 4; ++b) EXPECT_EQ((sys.G.block<3, 3>(3 + 3 * b, 3 * b)), Mat3::Identity());
  EXPECT_EQ(sys.G.cwiseAbs().sum(), 12.0);
}

TEST(PhiClosed, Identity) { EXPECT_EQ(phi_closed(build_system(GravityModel()), 0.0), Mat15::Identity()); }

TEST(PhiClosed, PositionGyroBiasEntry) {
  const auto phi = phi_closed(build_system(GravityModel(9.81)), 2.0);
  EXPECT_NEAR(phi(state_index::kPosition + 0, state_index::kGyroBias + 1), -13.08, 1e-12);
}

TEST(PhiClosed, MatchesSeries) {
  const auto sys = build_system(GravityModel());
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    const Mat15 a = phi_closed(sys, tau), b = series_phi(sys.F, tau);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12 * b.norm()) << tau;
  }
  EXPECT_THROW(phi_closed(sys, -1.0), InvalidArgument);
}

TEST(PhiClosed, Semigroup) {
  const auto sys = build_system(GravityModel());
  for (auto [a, b] : {std::pair{0.3, 1.7}, std::pair{10.0, 90.0}, std::pair{42.0, 0.0}}) {
    const Mat15 lhs = phi_closed(sys, a) * phi_closed(sys, b);
    EXPECT_LT(relative_frobenius(lhs, phi_closed(sys, a + b)), 1e-12);
  }
}

TEST(QClosed, ZeroAtZeroTau) {
  const auto sys = build_system(GravityModel());
  EXPECT_EQ(q_closed(sys, median_spectra(), 0.0), Mat15::Zero());
  EXPECT_THROW(q_closed(sys, median_spectra(), -0.1), InvalidArgument);
}

TEST(QClosed, GyroNoiseOnly) {
  const auto sys = build_system(GravityModel());
  NoiseSpectra s;
  s.s_g = 0.25;
  const auto q = q_closed(sys, s, 1.0);
  EXPECT_LT((q.block<3, 3>(state_index::kMisalignment, state_index::kMisalignment) - 0.25 * Mat3::Identity()).norm(), 1e-15);
}

TEST(QClosed, MatchesExactQuadrature) {
  const auto sys = build_system(GravityModel());
  const auto s = median_spectra();
  for (double tau : {0.1, 1.0, 10.0, 100.0}) {
    EXPECT_LT(relative_frobenius(q_closed(sys, s, tau), gauss_q(sys, s, tau)), 1e-10) << tau;
  }
}

TEST(QClosed, EachChannelMatchesQuadrature) {
  const auto sys = build_system(GravityModel());
  for (int c = 0; c < 4; ++c) {
    NoiseSpectra s;
    (c == 0 ? s.s_a : c == 1 ? s.s_g : c == 2 ? s.s_ab : s.s_gb) = 0.3;
    for (double tau : {0.5, 7.0}) EXPECT_LT(relative_frobenius(q_closed(sys, s, tau), gauss_q(sys, s, tau)), 1e-11);
  }
}

TEST(QClosed, SymmetricPsd) {
  const auto sys = build_system(GravityModel());
  for (double tau : {0.01, 1.0, 100.0}) {
    const auto q = q_closed(sys, median_spectra(), tau);
    EXPECT_TRUE(is_symmetric_psd(q)) << tau;
    Eigen::SelfAdjointEigenSolver<Mat15> es(q);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * q.trace());
  }
}

TEST(QCoefficients, PrintedVelocityTermIsTheOnlyDisagreement) {
  const auto sys = build_system(GravityModel());
  const auto log = audit_q_coefficients(sys);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].block, "Q_vv");
  EXPECT_EQ(log[0].channel, "s_a");
  EXPECT_GT(log[0].printed_relative_error, 0.1);
  EXPECT_LT(log[0].resolved_relative_error, 1e-10);
  NoiseSpectra s;
  s.s_a = 1.0;
  const auto printed = q_from_coefficients(sys, s, 1.0, QCoefficients::printed());
  EXPECT_NEAR(printed(state_index::kVelocity, state_index::kVelocity), 0.5, 1e-15);
  EXPECT_NEAR(q_closed(sys, s, 1.0)(state_index::kVelocity, state_index::kVelocity), 1.0, 1e-15);
}

TEST(QNumericOracle, SingleChannelAnalytic) {
  const auto sys = build_system(GravityModel());
  NoiseSpectra s;
  s.s_a = 2.0;
  const auto q = q_numeric_oracle(sys, s, 1.0, 200);
  const Mat3 I = Mat3::Identity();
  EXPECT_LT((q.block<3, 3>(0, 0) - 2.0 / 3.0 * I).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((q.block<3, 3>(0, 3) - 1.0 * I).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((q.block<3, 3>(3, 3) - 2.0 * I).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(QNumericOracle, ZeroSpectraAndArguments) {
  const auto sys = build_system(GravityModel());
  EXPECT_EQ(q_numeric_oracle(sys, NoiseSpectra{}, 10.0, 100), Mat15::Zero());
  EXPECT_THROW(q_numeric_oracle(sys, NoiseSpectra{}, 10.0, 99), InvalidArgument);
}

TEST(QNumericOracle, FourthOrderConvergence) {
  // The gyro random-walk channel has a degree-6 integrand, so Simpson has visible
  // error at coarse steps; the exact Gauss result stands in for the Richardson limit.
  const auto sys = build_system(GravityModel());
  NoiseSpectra s;
  s.s_gb = 1.0;
  const Mat15 exact = gauss_q(sys, s, 100.0);
  const double e1 = (q_numeric_oracle(sys, s, 100.0, 100) - exact).norm();
  const double e2 = (q_numeric_oracle(sys, s, 100.0, 200) - exact).norm();
  ASSERT_GT(e1, 0.0);
  EXPECT_GE(e1 / e2, 8.0);
}

TEST(QNumericOracle, MedianSpectraAtHundredSeconds) {
  const auto sys = build_system(GravityModel());
  const auto s = median_spectra();
  EXPECT_LT(relative_frobenius(q_closed(sys, s, 100.0), q_numeric_oracle(sys, s, 100.0, 2000)), 1e-6);
}

TEST(Semigroup, Cases) {
  const auto sys = build_system(GravityModel());
  EXPECT_EQ(semigroup_check(sys, median_spectra(), 0.0, 0.0), 0.0);
  EXPECT_LT(semigroup_check(sys, median_spectra(), 30.0, 70.0), 1e-9);
  NoiseSpectra s;
  s.s_gb = 1e-6;
  EXPECT_LT(semigroup_check(sys, s, 1.0, 1.0), 1e-12);
}

TEST(PropagateMean, ZeroBias) {
  const auto sys = build_system(GravityModel());
  for (double tau : {0.0, 1.0, 100.0}) {
    const auto e = propagate_mean(Vec3::Zero(), Vec3::Zero(), sys, tau);
    EXPECT_EQ(e.dp, Vec3::Zero());
    EXPECT_EQ(e.dv, Vec3::Zero());
    EXPECT_EQ(e.eps, Vec3::Zero());
  }
  EXPECT_THROW(propagate_mean(Vec3::Zero(), Vec3::Zero(), sys, -1.0), InvalidArgument);
}

TEST(PropagateMean, AccelBiasDown) {
  const auto sys = build_system(GravityModel());
  const auto e = propagate_mean(Vec3(0, 0, 0.1), Vec3::Zero(), sys, 10.0);
  EXPECT_NEAR(e.dp[2], 5.0, 1e-12);
  EXPECT_EQ(e.dp[0], 0.0);
  const Vec15 x = rk4_mean(sys, Vec3(0, 0, 0.1), Vec3::Zero(), 10.0, 1000);
  EXPECT_NEAR(x[state_index::kPosition + 2], 5.0, 1e-9);
}

TEST(PropagateMean, GyroBiasCouplesThroughGravity) {
  const auto sys = build_system(GravityModel(9.81));
  const auto e = propagate_mean(Vec3::Zero(), Vec3(0.001, 0, 0), sys, 6.0);
  EXPECT_NEAR(e.dp[1], 0.35316, 1e-10);
  EXPECT_NEAR(e.dp[0], 0.0, 1e-15);
  EXPECT_NEAR(e.dp[2], 0.0, 1e-15);
  const Vec15 x = rk4_mean(sys, Vec3::Zero(), Vec3(0.001, 0, 0), 6.0, 1000);
  EXPECT_NEAR(x[state_index::kPosition + 1], 0.35316, 1e-9);
  EXPECT_NEAR(x[state_index::kVelocity + 1], e.dv[1], 1e-12);
  EXPECT_NEAR(x[state_index::kMisalignment], e.eps[0], 1e-12);
}

TEST(PropagateMean, GrowthOrders) {
  const auto sys = build_system(GravityModel());
  std::vector<double> taus{10, 20, 40, 80}, pa, pg;
  for (double t : taus) {
    pa.push_back(propagate_mean(Vec3(0.1, 0.2, 0.1), Vec3::Zero(), sys, t).dp.norm());
    pg.push_back(propagate_mean(Vec3::Zero(), Vec3(1e-3, 2e-3, 0), sys, t).dp.norm());
  }
  EXPECT_NEAR(loglog_slope(taus, pa), 2.0, 1e-9);
  EXPECT_NEAR(loglog_slope(taus, pg), 3.0, 1e-9);
}

TEST(PropagateMean, DownChannelHasNoCubicTerm) {
  const auto sys = build_system(GravityModel());
  const Vec3 bg(0.01, 0.01, 0.01);
  // dp_z(tau) / tau^2 constant means no tau^3 component
  for (double t : {1.0, 10.0, 100.0}) EXPECT_EQ(propagate_mean(Vec3::Zero(), bg, sys, t).dp[2], 0.0);
  const Vec3 ba(0.1, 0.1, 0.1);
  const double c1 = propagate_mean(ba, bg, sys, 1.0).dp[2];
  const double c10 = propagate_mean(ba, bg, sys, 10.0).dp[2] / 100.0;
  EXPECT_NEAR(c1, c10, 1e-15);
}

TEST(PropagateDiscrete, ZeroInputsStayZero) {
  const auto sys = build_system(GravityModel());
  const auto traj = propagate_discrete(ErrorState{}, Mat15::Zero(), sys, NoiseSpectra{}, 0.1, 50);
  ASSERT_EQ(traj.size(), 51u);
  for (const auto& s : traj) {
    EXPECT_EQ(s.x.flatten(), Vec15::Zero());
    EXPECT_EQ(s.P, Mat15::Zero());
  }
  EXPECT_THROW(propagate_discrete(ErrorState{}, Mat15::Zero(), sys, NoiseSpectra{}, 0.0, 5), InvalidArgument);
}

TEST(PropagateDiscrete, MatchesClosedFormMean) {
  const auto sys = build_system(GravityModel());
  ErrorState x0;
  x0.ba = Vec3(0, 0, 0.1);
  const auto traj = propagate_discrete(x0, Mat15::Zero(), sys, NoiseSpectra{}, 0.01, 1000);
  EXPECT_NEAR(traj.back().x.dp[2], 5.0, 1e-9);
  EXPECT_NEAR(traj.back().t, 10.0, 1e-9);
}

TEST(PropagateDiscrete, SemigroupAgainstClosedForm) {
  const auto sys = build_system(GravityModel());
  const auto s = median_spectra();
  const auto traj = propagate_discrete(ErrorState{}, Mat15::Zero(), sys, s, 0.01, 10000);
  EXPECT_LT(relative_frobenius(traj.back().P, q_closed(sys, s, 100.0)), 1e-9);
}

TEST(ArrayAverage, Cases) {
  const Vec6 b = (Vec6() << 1, 2, 3, 4, 5, 6).finished();
  const std::vector<Vec6> same(4, b);
  EXPECT_LT((array_bias_average(same) - b).norm(), 1e-15);
  const std::vector<Vec6> pm{b, -b};
  EXPECT_EQ(array_bias_average(pm), Vec6::Zero());
  EXPECT_THROW(array_bias_average({}), InvalidArgument);
}

TEST(ArrayAverage, LinearityOfMeanPropagation) {
  const auto sys = build_system(GravityModel());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 0.05);
  std::vector<Vec6> biases(10);
  for (auto& b : biases)
    for (int i = 0; i < 6; ++i) b[i] = d(rng);
  const Vec6 avg = array_bias_average(biases);
  const auto m = propagate_mean(avg.tail<3>(), avg.head<3>(), sys, 100.0);
  Vec3 dp = Vec3::Zero();
  for (const auto& b : biases) dp += propagate_mean(b.tail<3>(), b.head<3>(), sys, 100.0).dp;
  dp /= 10.0;
  EXPECT_LT((m.dp - dp).norm(), 1e-12 * dp.norm());
}

TEST(ArrayQScale, Cases) {
  const auto sys = build_system(GravityModel());
  const auto q = q_closed(sys, median_spectra(), 100.0);
  EXPECT_EQ(array_q_scale(q, 1), q);
  const auto q10 = array_q_scale(q, 10);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(std::sqrt(q10(i, i) / q(i, i)), 0.316227766, 1e-9);
  const auto direct = q_closed(sys, median_spectra().scaled(0.1), 100.0);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 15; ++c)
      EXPECT_LE(std::abs(direct(r, c) - q10(r, c)), 1e-14 * std::abs(q10(r, c)) + 1e-300);
  EXPECT_THROW(array_q_scale(q, 0), InvalidArgument);
}

TEST(Ellipsoid, DiagonalCovariance) {
  const Mat3 p = Vec3(0.25, 4.0, 1.0).asDiagonal();
  const auto e = ellipsoid_from_cov(p, Vec3(1, 2, 3));
  EXPECT_NEAR(e.semi_axes[0], 2.0, 1e-14);
  EXPECT_NEAR(e.semi_axes[1], 1.0, 1e-14);
  EXPECT_NEAR(e.semi_axes[2], 0.5, 1e-14);
  EXPECT_EQ(e.centroid, Vec3(1, 2, 3));
  EXPECT_NEAR(std::abs(e.orientation(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.orientation(2, 1)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.orientation(0, 2)), 1.0, 1e-14);
  EXPECT_NEAR(e.orientation.determinant(), 1.0, 1e-12);
}

TEST(Ellipsoid, IsotropicSphere) {
  const auto e = ellipsoid_from_cov(Mat3::Identity() * 9.0, Vec3::Zero());
  EXPECT_LT((e.semi_axes - Vec3::Constant(3.0)).norm(), 1e-14);
  EXPECT_LT((e.orientation * e.orientation.transpose() - Mat3::Identity()).norm(), 1e-10);
}

TEST(Ellipsoid, ReconstructsRandomSpd) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d;
  for (int t = 0; t < 20; ++t) {
    Mat3 a;
    for (int i = 0; i < 9; ++i) a.data()[i] = d(rng);
    const Mat3 p = a * a.transpose() + 0.01 * Mat3::Identity();
    const auto e = ellipsoid_from_cov(p, Vec3::Zero());
    const Mat3 rec = e.orientation * e.semi_axes.cwiseAbs2().asDiagonal() * e.orientation.transpose();
    EXPECT_LT((rec - p).norm(), 1e-10 * p.norm());
    EXPECT_LT((e.orientation * e.orientation.transpose() - Mat3::Identity()).norm(), 1e-10);
    EXPECT_GE(e.semi_axes[0], e.semi_axes[1]);
    EXPECT_GE(e.semi_axes[1], e.semi_axes[2]);
    EXPECT_NEAR(e.orientation.determinant(), 1.0, 1e-10);
  }
}

TEST(Ellipsoid, RejectsInvalidInput) {
  Mat3 ns = Mat3::Identity();
  ns(0, 1) = 0.5;
  EXPECT_THROW(ellipsoid_from_cov(ns, Vec3::Zero()), InvalidArgument);
  EXPECT_THROW(ellipsoid_from_cov(-Mat3::Identity(), Vec3::Zero()), InvalidArgument);
}

TEST(Spectra, Interpretations) {
  const auto a = spectra_from_std(0.1, 0.2, 0.3, 0.4, NoiseInterpretation::psd_direct, 100.0);
  EXPECT_DOUBLE_EQ(a.s_a, 0.01);
  EXPECT_DOUBLE_EQ(a.s_gb, 0.16);
  const auto b = spectra_from_std(0.1, 0.2, 0.3, 0.4, NoiseInterpretation::discrete_per_sample, 100.0);
  EXPECT_DOUBLE_EQ(b.s_a, 0.01 / 100.0);
  EXPECT_DOUBLE_EQ(b.s_g, 0.04 / 100.0);
  EXPECT_DOUBLE_EQ(b.s_ab, 0.09);
  EXPECT_EQ(parse_noise_interpretation(to_string(NoiseInterpretation::discrete_per_sample)),
            NoiseInterpretation::discrete_per_sample);
  EXPECT_THROW(parse_noise_interpretation("psd"), ConfigError);
}

TEST(ErrorStateLayout, FlattenRoundTrip) {
  Vec15 v;
  for (int i = 0; i < 15; ++i) v[i] = i;
  const auto s = ErrorState::from_vector(v);
  EXPECT_EQ(s.dv[0], 3.0);
  EXPECT_EQ(s.bg[2], 14.0);
  EXPECT_EQ(s.flatten(), v);
  EXPECT_EQ(state_index::names().size(), 15u);
  EXPECT_EQ(state_index::names()[0], "dp_x");
  EXPECT_EQ(state_index::names()[14], "bg_z");
}
