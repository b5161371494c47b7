#include <random>

#include <gtest/gtest.h>

#include "rsmajrc/comms.hpp"
#include "test_util.hpp"

using namespace rsmajrc;
using testutil::make_channels;

namespace {

QuantizationModel model(double delta, double noise_var) {
  QuantizationModel q;
  q.delta = delta;
  q.noise_var = noise_var;
  return q;
}

// Two antennas, two users: h_1 = [1, 0], p_c = [1, 0], p_1 = [0.5, 0], p_2 = [0, 1].
struct HandExample {
  ChannelSet ch = make_channels((CMat(2, 2) << 1, 0, 0, 1).finished());
  PrecoderMatrix p = PrecoderMatrix((CMat(2, 3) << 1, 0.5, 0, 0, 0, 1).finished());
  QuantizationModel q = model(0.9, 0.01);
  double noise = 0.01;
};

}  // namespace

TEST(Comms, EffectiveNoiseVariance) {
  const CVec h = CVec::Ones(4);
  EXPECT_NEAR(effective_noise_variance(h.adjoint(), 0.1, 1e-5), 0.40001, 1e-15);
  EXPECT_DOUBLE_EQ(effective_noise_variance(h.adjoint(), 0.0, 1e-5), 1e-5);
  EXPECT_DOUBLE_EQ(effective_noise_variance(CVec::Zero(4).adjoint(), 0.1, 1e-5), 1e-5);
}

TEST(Comms, CommonSinrHandExample) {
  const HandExample ex;
  const double eta = effective_noise_variance(ex.ch.row(0), ex.q.noise_var, ex.noise);
  EXPECT_NEAR(eta, 0.02, 1e-15);
  const double oracle = 1.0 / (0.02 / 0.81 + 0.25);
  const double g = common_sinr(ex.p, ex.ch.row(0), ex.q.delta, eta);
  EXPECT_NEAR(g, oracle, 1e-12);
  EXPECT_NEAR(g, 3.640, 1e-3);
  const StreamRates r = stream_rates(ex.p, ex.ch, ex.q, ex.noise);
  EXPECT_NEAR(r.common(0), std::log2(1.0 + oracle), 1e-12);
  EXPECT_NEAR(r.common(0), 2.214, 1e-3);
}

TEST(Comms, ZeroCommonPrecoderGivesZeroCommonSinr) {
  HandExample ex;
  ex.p.common().setZero();
  const StreamRates r = stream_rates(ex.p, ex.ch, ex.q, ex.noise);
  EXPECT_EQ(r.common.maxCoeff(), 0.0);
}

TEST(Comms, InterferenceFreeSingleUser) {
  const double pw = 2.5, sn = 0.1;
  const ChannelSet ch = make_channels((CMat(1, 2) << 1, 0).finished());
  const PrecoderMatrix p((CMat(2, 2) << 0, std::sqrt(pw), 0, 0).finished());
  const double eta = effective_noise_variance(ch.row(0), 0.0, sn);
  EXPECT_NEAR(private_sinr(p, ch.row(0), 0, 1.0, eta), pw / sn, 1e-12);
  EXPECT_THROW(private_sinr(p, ch.row(0), 0, 0.0, eta), std::invalid_argument);
  const QuantizationModel ideal = QuantizationModel::ideal();
  EXPECT_NEAR(objective_sum_rate(p, RVec::Zero(1), ch, ideal, sn), std::log2(1.0 + pw / sn), 1e-12);
}

TEST(Comms, ShannonRate) {
  EXPECT_EQ(shannon_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(shannon_rate(1.0), 1.0);
}

TEST(Comms, InfeasibleCommonSplitIsRejected) {
  const HandExample ex;
  const StreamRates r = stream_rates(ex.p, ex.ch, ex.q, ex.noise);
  const double min_rc = r.common.minCoeff();
  RVec c(2);
  c << min_rc / 2 + 5e-4, min_rc / 2 + 5e-4;
  try {
    objective_sum_rate(ex.p, c, ex.ch, ex.q, ex.noise);
    FAIL() << "expected InfeasibleRates";
  } catch (const InfeasibleRates& e) {
    Eigen::Index worst = 0;
    r.common.minCoeff(&worst);
    EXPECT_EQ(e.user, static_cast<int>(worst));
  }
  c << -1e-3, 0.0;
  EXPECT_THROW(objective_sum_rate(ex.p, c, ex.ch, ex.q, ex.noise), InfeasibleRates);
}

TEST(Comms, FeasibleObjectiveMatchesRecomputation) {
  std::mt19937_64 rng(11);
  const ChannelSet ch = make_channels(testutil::random_cmat(3, 4, rng));
  const PrecoderMatrix p = testutil::random_precoders(4, 3, rng, 0.3);
  const QuantizationModel q = model(resolution_delta(3), quantization_noise_variance_for_bits(3));
  const StreamRates r = stream_rates(p, ch, q, 1e-3);
  RVec c(3);
  c << 0.2, 0.5, 0.3;
  c *= r.common.minCoeff();
  EXPECT_NEAR(objective_sum_rate(p, c, ch, q, 1e-3), c.sum() + r.privat.sum(), 1e-12);
  // SDMA reduction: p_c = 0 and c = 0 gives the plain private sum-rate
  PrecoderMatrix sdma = p;
  sdma.common().setZero();
  EXPECT_NEAR(objective_sum_rate(sdma, RVec::Zero(3), ch, q, 1e-3), stream_rates(sdma, ch, q, 1e-3).privat.sum(),
              1e-12);
}

TEST(Comms, ScaledFormMatchesNormalizedForm) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelSet ch = make_channels(testutil::random_cmat(2, 4, rng));
    const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
    const double delta = resolution_delta(1 + trial % 6);
    const double eta = effective_noise_variance(ch.row(1), 0.05, 0.01);
    const double a = common_sinr(p, ch.row(1), delta, eta);
    EXPECT_NEAR(a, common_sinr_scaled_form(p, ch.row(1), delta, eta), 1e-12 * std::max(1.0, a));
    const double b = private_sinr(p, ch.row(1), 1, delta, eta);
    EXPECT_NEAR(b, private_sinr_scaled_form(p, ch.row(1), 1, delta, eta), 1e-12 * std::max(1.0, b));
  }
}

TEST(Comms, PrivateSinrGrowsWithOwnPower) {
  std::mt19937_64 rng(13);
  const ChannelSet ch = make_channels(testutil::random_cmat(2, 3, rng));
  PrecoderMatrix p = testutil::random_precoders(3, 2, rng);
  double prev = -1.0;
  for (int s = 0; s < 10; ++s) {
    const double g = private_sinr(p, ch.row(0), 0, 0.9, 0.01);
    EXPECT_GE(g, prev);
    prev = g;
    p.priv(0) *= 1.3;
  }
}

TEST(Comms, IdealConverterReducesToUnquantizedModel) {
  std::mt19937_64 rng(14);
  const ChannelSet ch = make_channels(testutil::random_cmat(2, 3, rng));
  const PrecoderMatrix p = testutil::random_precoders(3, 2, rng);
  const double sn = 0.05;
  const StreamRates r = stream_rates(p, ch, QuantizationModel::ideal(), sn);
  for (int k = 0; k < 2; ++k) {
    const CVec h = ch.row(k).adjoint();
    const double gc = std::norm(h.dot(p.common()));
    double interference = 0.0;
    for (int j = 0; j < 2; ++j) interference += std::norm(h.dot(p.priv(j)));
    const double gk = std::norm(h.dot(p.priv(k)));
    EXPECT_NEAR(r.common(k), std::log2(1.0 + gc / (sn + interference)), 1e-12);
    EXPECT_NEAR(r.privat(k), std::log2(1.0 + gk / (sn + interference - gk)), 1e-12);
  }
}
