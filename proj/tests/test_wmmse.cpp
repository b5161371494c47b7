#include <random>

#include <gtest/gtest.h>

#include "rsmajrc/wmmse.hpp"
#include "test_util.hpp"

using namespace rsmajrc;
using testutil::make_channels;

namespace {

QuantizationModel quant(int bits) {
  SystemConfig c;
  c.bits = bits;
  return QuantizationModel::from_config(c);
}

struct Instance {
  ChannelSet ch;
  Link link;
  Consensus cons;
};

Instance random_instance(std::mt19937_64& rng, int users, int antennas, double rho, int bits = 4,
                         double noise = 1e-2) {
  Instance in;
  in.ch = make_channels(testutil::random_cmat(users, antennas, rng));
  in.link = Link{&in.ch, quant(bits), noise};
  std::normal_distribution<double> n01(0.0, 1.0);
  RVec y(2 * antennas * (users + 1));
  for (auto& v : y) v = 0.1 * n01(rng);
  in.cons = Consensus{testutil::random_precoders(antennas, users, rng, 0.4), y, rho};
  return in;
}

}  // namespace

TEST(Wmmse, InterferenceFreeEqualizer) {
  const ChannelSet ch = make_channels((CMat(1, 1) << 1).finished());
  const Link link{&ch, QuantizationModel::ideal(), 1.0};
  const PrecoderMatrix p((CMat(1, 2) << 0, 1).finished());
  const Equalizers e = update_equalizers(p, link);
  EXPECT_NEAR(std::abs(e.privat(0) - cd(0.5, 0)), 0.0, 1e-15);
  EXPECT_EQ(e.common(0), cd(0, 0));
  const Equalizers z = update_equalizers(PrecoderMatrix(1, 1), link);
  EXPECT_EQ(z.privat(0), cd(0, 0));
}

TEST(Wmmse, EqualizerMinimizesMse) {
  std::mt19937_64 rng(21);
  Instance in = random_instance(rng, 2, 4, 0.0);
  const PrecoderMatrix p = testutil::random_precoders(4, 2, rng);
  const Equalizers opt = update_equalizers(p, in.link);
  const StreamMse best = stream_mse(p, in.link, opt);
  std::normal_distribution<double> n01(0.0, 0.05);
  for (int i = 0; i < 100; ++i) {
    Equalizers e = opt;
    const int k = i % 2;
    e.common(k) += cd(n01(rng), n01(rng));
    e.privat(k) += cd(n01(rng), n01(rng));
    const StreamMse m = stream_mse(p, in.link, e);
    EXPECT_GE(m.common(k), best.common(k) - 1e-14);
    EXPECT_GE(m.privat(k), best.privat(k) - 1e-14);
  }
}

TEST(Wmmse, WeightExamples) {
  StreamMse m{(RVec(2) << 0.5, 1.0).finished(), (RVec(2) << 1.0, 0.25).finished()};
  const Weights w = update_weights(m);
  EXPECT_DOUBLE_EQ(w.common(0), 2.0);
  EXPECT_DOUBLE_EQ(w.common(1), 1.0);
  EXPECT_DOUBLE_EQ(w.privat(1), 4.0);
  m.privat(0) = 0.0;
  EXPECT_THROW(update_weights(m), std::invalid_argument);
}

TEST(Wmmse, RateIdentityAtOptimalEqualizer) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    Instance in = random_instance(rng, 3, 4, 0.0, 1 + trial % 8);
    const PrecoderMatrix p = testutil::random_precoders(4, 3, rng);
    const Weights w = update_weights(stream_mse(p, in.link, update_equalizers(p, in.link)));
    const StreamRates r = stream_rates(p, in.ch, in.link.quant, in.link.noise_power);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(std::log2(w.privat(k)), r.privat(k), 1e-9);
      EXPECT_NEAR(std::log2(w.common(k)), r.common(k), 1e-9);
    }
  }
}

TEST(Wmmse, PenaltyDominatesAtLargeRho) {
  std::mt19937_64 rng(23);
  Instance in = random_instance(rng, 2, 4, 1e6);
  in.cons.y.setZero();
  const VUpdateResult v = solve_v_update(in.cons, in.link, AccessMode::kRsma, 1e-10, 50);
  EXPECT_LT((v.v.p.vec() - in.cons.u_precoders.vec()).norm(), 1e-3);
}

TEST(Wmmse, SingleUserStepIsMatchedFilter) {
  std::mt19937_64 rng(24);
  const ChannelSet ch = make_channels(testutil::random_cmat(1, 3, rng));
  const Link link{&ch, quant(6), 1e-2};
  const Consensus cons{PrecoderMatrix(3, 1), RVec::Zero(12), 0.0};
  PrecoderMatrix p = testutil::random_precoders(3, 1, rng);
  p.common().setZero();
  WmmseState st;
  st.equalizers = update_equalizers(p, link);
  st.weights = update_weights(stream_mse(p, link, st.equalizers));
  const SubproblemResult sub = solve_precoder_subproblem(st, cons, link, AccessMode::kSdma, p);
  const CVec h = ch.row(0).adjoint();
  const double cosine = std::abs(h.dot(sub.p.priv(0))) / (h.norm() * sub.p.priv(0).norm());
  EXPECT_LT(std::acos(std::min(1.0, cosine)), 1e-6);
  EXPECT_EQ(sub.p.common().norm(), 0.0);
}

TEST(Wmmse, ObjectiveTraceIsMonotoneAndOutputFeasible) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    Instance in = random_instance(rng, 2, 4, 1.0, 2 + trial);
    const VUpdateResult v = solve_v_update(in.cons, in.link, AccessMode::kRsma, 1e-12, 60);
    const auto& tr = v.state.objective_trace;
    ASSERT_GE(tr.size(), 2u);
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1] + 1e-8);
    const StreamRates r = stream_rates(v.v.p, in.ch, in.link.quant, in.link.noise_power);
    EXPECT_GE(v.v.c.minCoeff(), 0.0);
    EXPECT_LE(v.v.c.sum(), r.common.minCoeff() + 1e-8);
    EXPECT_NEAR(v.state.last_objective, v_block_objective(v.v.p, v.v.c, in.cons, in.link), 1e-9);
  }
}

TEST(Wmmse, SdmaPinsCommonStream) {
  std::mt19937_64 rng(26);
  Instance in = random_instance(rng, 2, 4, 1.0);
  const VUpdateResult v = solve_v_update(in.cons, in.link, AccessMode::kSdma, 1e-10, 40);
  EXPECT_EQ(v.v.p.common().norm(), 0.0);
  EXPECT_EQ(v.v.c.norm(), 0.0);
}

TEST(Wmmse, WarmStartFromFixedPointStopsAfterOneCycle) {
  std::mt19937_64 rng(27);
  Instance in = random_instance(rng, 2, 3, 100.0);
  const VUpdateResult first = solve_v_update(in.cons, in.link, AccessMode::kRsma, 1e-10, 2000);
  ASSERT_LT(first.state.iterations, 2000);
  const VUpdateResult second = solve_v_update(in.cons, in.link, AccessMode::kRsma, 1e-10, 2000, first.v);
  EXPECT_EQ(second.state.iterations, 1);
}
