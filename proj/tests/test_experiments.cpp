#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rsmajrc/experiments.hpp"
#include "test_util.hpp"

using namespace rsmajrc;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rsmajrc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentSpec small_spec(const fs::path& out) {
  ExperimentSpec spec;
  spec.base = testutil::small_config();
  spec.base.admm_max_iter = 15;
  spec.bits = {3, 5};
  spec.out_dir = out;
  return spec;
}

}  // namespace

TEST(Experiments, EmptySweepsAreRejected) {
  ExperimentSpec spec;
  EXPECT_THROW(run_convergence(spec), std::invalid_argument);
  EXPECT_THROW(run_bit_sweep(spec), std::invalid_argument);
  spec.bits = {4};
  spec.modes.clear();
  EXPECT_THROW(run_tradeoff_sweep(spec), std::invalid_argument);
  EXPECT_THROW(run_quantizer_validation({}, 10, 1, "unused", 1), std::invalid_argument);
}

TEST(Experiments, LambdaGridIsLogarithmic) {
  const auto g = log_lambda_grid();
  ASSERT_EQ(g.size(), 9u);
  EXPECT_NEAR(g.front(), 0.01, 1e-15);
  EXPECT_NEAR(g[4], 1.0, 1e-15);
  EXPECT_NEAR(g.back(), 100.0, 1e-12);
}

TEST(Experiments, ConvergenceSweepIsByteReproducible) {
  const fs::path a = scratch("conv_a"), b = scratch("conv_b");
  ExperimentSpec spec = small_spec(a);
  spec.modes = {AccessMode::kSdma};
  const SweepResult ra = run_convergence(spec);
  spec.out_dir = b;
  spec.workers = 2;
  const SweepResult rb = run_convergence(spec);
  ASSERT_TRUE(ra.failures.empty());
  ASSERT_EQ(ra.records.size(), 2u);
  EXPECT_EQ(slurp(a / "convergence.csv"), slurp(b / "convergence.csv"));
  for (const auto& r : ra.records) {
    ASSERT_TRUE(fs::exists(r.trace_file));
    EXPECT_EQ(slurp(r.trace_file), slurp(b / r.trace_file.filename()));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiments, StoredPrecodersRegenerateMetrics) {
  const fs::path out = scratch("bits");
  ExperimentSpec spec = small_spec(out);
  spec.bits = {4, 13};
  const SweepResult res = run_bit_sweep(spec);
  ASSERT_TRUE(res.failures.empty());
  ASSERT_EQ(res.warnings.size(), 1u);  // b = 13 leaves no precoder power on 2 antennas
  ASSERT_EQ(res.records.size(), 2u);   // rsma and sdma at b = 4
  for (const auto& r : res.records) {
    const StoredPrecoders s = load_precoders(r.precoder_file);
    EXPECT_EQ(describe(s.cfg), describe(r.cfg));
    const Metrics m = regenerate_metrics(s);
    EXPECT_NEAR(m.sum_rate, r.metrics.sum_rate, 1e-9);
    EXPECT_NEAR(m.nmse, r.metrics.nmse, 1e-9);
  }
  const std::string csv = slurp(out / "bitsweep.csv");
  EXPECT_NE(csv.find("nmse_db"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "bitsweep_summary.txt"));
  EXPECT_TRUE(fs::exists(out / "bitsweep_summary.csv"));
  fs::remove_all(out);
}

TEST(Experiments, TradeoffWritesOneFilePerBitValue) {
  const fs::path out = scratch("trade");
  ExperimentSpec spec = small_spec(out);
  spec.lambdas = {0.1, 10.0};
  spec.modes = {AccessMode::kSdma};
  const SweepResult res = run_tradeoff_sweep(spec);
  ASSERT_TRUE(res.failures.empty());
  EXPECT_EQ(res.records.size(), 4u);
  EXPECT_TRUE(fs::exists(out / "tradeoff_b3.csv"));
  EXPECT_TRUE(fs::exists(out / "tradeoff_b5.csv"));
  fs::remove_all(out);
}

TEST(Experiments, PrecoderTextRoundTripsAtFullPrecision) {
  SystemConfig cfg = testutil::small_config();
  Solution s;
  s.p = PrecoderMatrix((CMat(2, 2) << cd(0.1, -1.0 / 3.0), cd(2e-17, 7), cd(-0.0, 1e300), cd(M_PI, -M_E)).finished());
  s.c = (RVec(1) << 0.123456789012345678).finished();
  s.alpha = 1.0 / 7.0;
  std::istringstream in(precoder_text(cfg, s));
  const StoredPrecoders back = parse_precoders(in);
  EXPECT_TRUE(back.p.matrix() == s.p.matrix());
  EXPECT_EQ(back.c(0), s.c(0));
  EXPECT_EQ(back.alpha, s.alpha);
  std::istringstream bad("0 0 1.0\n");
  EXPECT_THROW(parse_precoders(bad), std::runtime_error);
}

TEST(Experiments, ParallelForCollectsErrorsPerIndex) {
  std::vector<int> hit(6, 0);
  const auto errors = parallel_for(6, 3, [&](std::size_t i) {
    hit[i] = 1;
    if (i == 4) throw std::runtime_error("boom");
  });
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(hit[i], 1);
    EXPECT_EQ(errors[i].empty(), i != 4);
  }
}

TEST(Experiments, QuantizerValidationIsReproducibleAndCalibrated) {
  const QuantizerCheck a = validate_quantizer(4, 200000, 3);
  const QuantizerCheck b = validate_quantizer(4, 200000, 3);
  EXPECT_EQ(a.empirical_gain, b.empirical_gain);
  EXPECT_EQ(a.correlation, b.correlation);
  for (int bits = 3; bits <= 8; ++bits) {
    const QuantizerCheck q = validate_quantizer(bits, 200000, 5);
    EXPECT_LT(std::abs(q.empirical_gain - q.model_delta) / q.model_delta, 0.15) << "b=" << bits;
  }
}
