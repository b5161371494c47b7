#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "rsmajrc/radar.hpp"
#include "test_util.hpp"

using namespace rsmajrc;

namespace {

AngleGrid reference_grid(int antennas = 4) {
  return make_angle_grid(uniform_angles(-90, 90, 1), antennas, 0.5, 0.0, 10.0);
}

}  // namespace

TEST(Radar, CovarianceExamples) {
  const PrecoderMatrix zero(2, 1);
  const CMat r0 = transmit_covariance(zero, 0.7, 0.3);
  EXPECT_TRUE(r0.isApprox(0.3 * CMat::Identity(2, 2)));
  const PrecoderMatrix single((CMat(2, 2) << 1, 0, 0, 0).finished());
  const CMat r1 = transmit_covariance(single, 1.0, 0.0);
  EXPECT_TRUE(r1 == (CMat(2, 2) << 1, 0, 0, 0).finished());

  std::mt19937_64 rng(1);
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  const CMat r = transmit_covariance(p, 0.9, 0.01);
  EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<CMat> es(r);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(Radar, ErrorExamples) {
  const AngleGrid g = reference_grid();
  const PrecoderMatrix zero(4, 2);
  EXPECT_NEAR(beampattern_error(1.0, zero, 1.0, 0.0, g), 11.0, 1e-12);
  EXPECT_NEAR(nmse(1.0, zero, 1.0, 0.0, g), 1.0, 1e-12);

  const RVec desired = g.desired;
  EXPECT_EQ(pattern_error(2.5, 2.5 * desired, desired), 0.0);
  EXPECT_EQ(nmse(2.5, 2.5 * desired, desired), 0.0);
  EXPECT_THROW(beampattern_error(0.0, zero, 1.0, 0.0, g), std::invalid_argument);
}

TEST(Radar, OptimalAlphaExamples) {
  const AngleGrid g = reference_grid();
  EXPECT_NEAR(optimal_alpha(RVec(3.0 * g.desired), g.desired), 3.0, 1e-15);
  const RVec orthogonal = (1.0 - g.desired.array()).matrix();
  EXPECT_EQ(optimal_alpha(orthogonal, g.desired), kAlphaFloor);
  EXPECT_THROW(optimal_alpha(orthogonal, RVec::Zero(g.size())), std::invalid_argument);
}

TEST(Radar, OptimalAlphaBeatsRandomScales) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(1e-3, 20.0);
  const AngleGrid g = reference_grid();
  for (int trial = 0; trial < 5; ++trial) {
    const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
    const double a = optimal_alpha(p, 0.95, 0.01, g);
    const double best = beampattern_error(a, p, 0.95, 0.01, g);
    for (int i = 0; i < 100; ++i) EXPECT_LE(best, beampattern_error(scale(rng), p, 0.95, 0.01, g) + 1e-12);
  }
}

TEST(Radar, NmseIsScaleInvariant) {
  std::mt19937_64 rng(3);
  const AngleGrid g = reference_grid();
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  const RVec pat = achieved_pattern(p, 0.9, 0.02, g);
  EXPECT_NEAR(nmse(1.7, pat, g.desired), nmse(1.7 * 4.0, RVec(4.0 * pat), g.desired), 1e-12);
}

TEST(Radar, TwoPatternPathsAgree) {
  std::mt19937_64 rng(4);
  const AngleGrid g = reference_grid();
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  const RVec direct = achieved_pattern(p, 0.8, 0.03, g);
  const RVec via_cov = achieved_pattern_from_covariance(transmit_covariance(p, 0.8, 0.03), g);
  EXPECT_LT((direct - via_cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Radar, QuantizationNoiseIsConstantOffset) {
  std::mt19937_64 rng(5);
  const AngleGrid g = reference_grid();
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  const RVec diff = achieved_pattern(p, 0.8, 0.05, g) - achieved_pattern(p, 0.8, 0.0, g);
  EXPECT_LT((diff.array() - 0.05 * 4).abs().maxCoeff(), 1e-12);
}

TEST(Radar, ErrorIsConvexInCovariance) {
  std::mt19937_64 rng(6);
  const AngleGrid g = reference_grid();
  const double d2 = 0.81, se = 0.02, alpha = 1.3;
  auto err = [&](const CMat& rp) {
    RVec pat = achieved_pattern_from_covariance(d2 * rp, g).array() + se * 4;
    return pattern_error(alpha, pat, g.desired);
  };
  for (int trial = 0; trial < 20; ++trial) {
    const CMat a = testutil::random_cmat(4, 3, rng);
    const CMat b = testutil::random_cmat(4, 3, rng);
    const CMat ra = a * a.adjoint(), rb = b * b.adjoint();
    EXPECT_LE(err(0.5 * (ra + rb)), 0.5 * (err(ra) + err(rb)) + 1e-9);
  }
}

TEST(Radar, ReportUsesLeastSquaresScaleByDefault) {
  std::mt19937_64 rng(7);
  const AngleGrid g = reference_grid();
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  QuantizationModel q;
  q.delta = 0.9;
  q.noise_var = 0.01;
  const BeampatternReport rep = beampattern_report(p, q, g);
  EXPECT_DOUBLE_EQ(rep.alpha, optimal_alpha(p, q.delta, q.noise_var, g));
  EXPECT_DOUBLE_EQ(rep.error, beampattern_error(rep.alpha, p, q.delta, q.noise_var, g));
  EXPECT_DOUBLE_EQ(beampattern_report(p, q, g, 2.0).alpha, 2.0);
}
