#pragma once

#include <cstdint>
#include <random>

#include "rsmajrc/admm.hpp"

namespace testutil {

using namespace rsmajrc;

inline CMat random_cmat(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, scale * std::sqrt(0.5));
  CMat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double re = n01(rng);
      const double im = n01(rng);
      m(i, j) = cd(re, im);
    }
  return m;
}

inline PrecoderMatrix random_precoders(int antennas, int users, std::mt19937_64& rng, double scale = 1.0) {
  return PrecoderMatrix(random_cmat(antennas, users + 1, rng, scale));
}

inline ChannelSet make_channels(CMat h) {
  ChannelSet ch;
  ch.h = std::move(h);
  return ch;
}

// Two antennas, one user, 10 degree grid: small enough for full runs in unit tests.
inline SystemConfig small_config() {
  SystemConfig c;
  c.users = 1;
  c.antennas = 2;
  c.grid_resolution_deg = 10.0;
  c.beamwidth_deg = 10.0;
  c.bits = 4;
  c.lambda = 1.0;
  c.admm_max_iter = 40;
  return c;
}

}  // namespace testutil
