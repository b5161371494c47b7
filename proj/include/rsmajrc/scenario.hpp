#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rsmajrc/config.hpp"
#include "rsmajrc/types.hpp"

namespace rsmajrc {

/// Flat-fading channels; row k of `h` is h_k^H.
struct ChannelSet {
  CMat h;
  std::uint64_t seed = 0;
  std::uint64_t draw_index = 0;

  int users() const { return static_cast<int>(h.rows()); }
  int antennas() const { return static_cast<int>(h.cols()); }
  /// h_k^H as a row.
  auto row(int k) const { return h.row(k); }
};

/// Unit-variance circularly-symmetric Gaussian entries. The draw index picks an
/// independent realization for the same seed.
inline ChannelSet generate_rayleigh_channels(const SystemConfig& cfg, std::uint64_t draw_index = 0) {
  validate(cfg);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(draw_index), static_cast<std::uint32_t>(draw_index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  ChannelSet out;
  out.seed = cfg.seed;
  out.draw_index = draw_index;
  out.h.resize(cfg.users, cfg.antennas);
  for (int k = 0; k < cfg.users; ++k)
    for (int n = 0; n < cfg.antennas; ++n) {
      const double re = n01(rng);
      const double im = n01(rng);
      out.h(k, n) = cd(re, im);
    }
  return out;
}

/// ULA response a(theta) with element n equal to exp(j 2 pi n d sin(theta)).
inline CVec steering_vector(double theta_deg, int antennas, double spacing) {
  if (antennas < 1) throw std::invalid_argument("steering_vector: antennas must be >= 1");
  CVec a(antennas);
  const double phase = 2.0 * kPi * spacing * std::sin(theta_deg * kPi / 180.0);
  a(0) = cd(1.0, 0.0);
  for (int n = 1; n < antennas; ++n) a(n) = std::polar(1.0, phase * n);
  return a;
}

/// Rect beam: 1 within beamwidth/2 of the target, 0 elsewhere. A zero width
/// marks the single grid point nearest the target.
inline RVec desired_beampattern(const std::vector<double>& thetas, double target_deg, double beamwidth_deg) {
  if (thetas.empty()) throw std::invalid_argument("desired_beampattern: empty grid");
  if (target_deg < thetas.front() || target_deg > thetas.back())
    throw std::invalid_argument("desired_beampattern: target angle outside the grid range");
  if (beamwidth_deg < 0) throw std::invalid_argument("desired_beampattern: negative beamwidth");
  RVec d = RVec::Zero(static_cast<Eigen::Index>(thetas.size()));
  const double half = beamwidth_deg / 2.0;
  constexpr double kEdge = 1e-9;
  for (std::size_t m = 0; m < thetas.size(); ++m)
    if (std::abs(thetas[m] - target_deg) <= half + kEdge) d(static_cast<Eigen::Index>(m)) = 1.0;
  if (d.sum() == 0.0) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < thetas.size(); ++m)
      if (std::abs(thetas[m] - target_deg) < std::abs(thetas[best] - target_deg)) best = m;
    d(static_cast<Eigen::Index>(best)) = 1.0;
  }
  return d;
}

/// Azimuth grid with steering vectors and the desired pattern.
struct AngleGrid {
  std::vector<double> thetas;   // degrees, strictly increasing
  std::vector<CVec> steering;   // one length-N_t vector per angle
  CMat steering_matrix;         // N_t x M, column m = steering[m]
  RVec desired;                 // P_d(theta_m) >= 0

  int size() const { return static_cast<int>(thetas.size()); }
};

inline std::vector<double> uniform_angles(double lo, double hi, double step) {
  if (!(step > 0) || hi < lo) throw std::invalid_argument("uniform_angles: bad range");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

inline AngleGrid make_angle_grid(const std::vector<double>& thetas, int antennas, double spacing,
                                 double target_deg, double beamwidth_deg) {
  AngleGrid g;
  g.thetas = thetas;
  for (std::size_t i = 1; i < thetas.size(); ++i)
    if (!(thetas[i] > thetas[i - 1])) throw std::invalid_argument("angle grid must be strictly increasing");
  g.steering.reserve(thetas.size());
  for (double t : thetas) g.steering.push_back(steering_vector(t, antennas, spacing));
  g.steering_matrix.resize(antennas, static_cast<Eigen::Index>(thetas.size()));
  for (std::size_t i = 0; i < thetas.size(); ++i) g.steering_matrix.col(static_cast<Eigen::Index>(i)) = g.steering[i];
  g.desired = desired_beampattern(thetas, target_deg, beamwidth_deg);
  return g;
}

/// Field of view [-90, 90] degrees at the configured resolution.
inline AngleGrid make_angle_grid(const SystemConfig& cfg) {
  if (cfg.beamwidth_deg > 0 && cfg.beamwidth_deg < cfg.grid_resolution_deg)
    throw std::invalid_argument("beamwidth must be >= grid resolution");
  return make_angle_grid(uniform_angles(-90.0, 90.0, cfg.grid_resolution_deg), cfg.antennas, cfg.spacing,
                         cfg.target_angle_deg, cfg.beamwidth_deg);
}

}  // namespace rsmajrc
