#include <sstream>

#include <gtest/gtest.h>

#include "rsmajrc/config.hpp"

using namespace rsmajrc;

TEST(Config, DefaultsDescribeReferenceScenario) {
  const SystemConfig c;
  EXPECT_EQ(c.users, 2);
  EXPECT_EQ(c.antennas, 4);
  EXPECT_DOUBLE_EQ(c.spacing, 0.5);
  EXPECT_DOUBLE_EQ(c.p_total, 1.0);
  EXPECT_DOUBLE_EQ(c.p_dac, 100e-6);
  EXPECT_DOUBLE_EQ(c.noise_power, 10e-6);
  EXPECT_DOUBLE_EQ(c.target_angle_deg, 0.0);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, ParsesKeysAliasesAndComments) {
  std::istringstream in("# scenario\nK = 3\nN_t=6  # antennas\nb = 5\nmode = sdma\nnoise_var_formula = aqnm\n"
                        "warm_start_from_sdma = false\nlambda = 0.25\n\n");
  const SystemConfig c = parse_config(in);
  EXPECT_EQ(c.users, 3);
  EXPECT_EQ(c.antennas, 6);
  EXPECT_EQ(c.bits, 5);
  EXPECT_EQ(c.mode, AccessMode::kSdma);
  EXPECT_EQ(c.noise_var_formula, NoiseVarFormula::kAqnm);
  EXPECT_FALSE(c.warm_start_from_sdma);
  EXPECT_DOUBLE_EQ(c.lambda, 0.25);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  std::istringstream unknown("colour = blue\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream bad("bits = four\n");
  EXPECT_THROW(parse_config(bad), ConfigError);
  std::istringstream no_eq("bits 4\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
}

TEST(Config, DescribeRoundTrips) {
  SystemConfig c;
  c.users = 3;
  c.lambda = 0.1;
  c.noise_power = 3.3e-7;
  c.mode = AccessMode::kSdma;
  std::ostringstream os;
  for (const auto& [k, v] : describe(c)) os << k << " = " << v << '\n';
  std::istringstream in(os.str());
  const SystemConfig back = parse_config(in);
  EXPECT_EQ(describe(back), describe(c));
}

TEST(Config, ValidateRejectsBoundaryCases) {
  SystemConfig c;
  c.users = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.bits = 12;
  EXPECT_THROW(validate(c), ConfigError);
  c.bits = 11;
  EXPECT_NO_THROW(validate(c));
  c = {};
  c.noise_power = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
}
