#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rsmajrc/quantization.hpp"
#include "rsmajrc/scenario.hpp"
#include "rsmajrc/types.hpp"

namespace rsmajrc {

/// Thrown when a common-rate split violates c >= 0 or sum(c) <= R_c,k.
struct InfeasibleRates : std::runtime_error {
  InfeasibleRates(const std::string& what, int user) : std::runtime_error(what), user(user) {}
  int user;  // offending user, -1 for the sign constraint on the whole vector
};

/// sigma_eta^2 = sigma_e^2 h^H h + sigma_n^2
template <typename Row>
double effective_noise_variance(const Row& h, double quant_noise_var, double noise_power) {
  if (quant_noise_var < 0) throw std::invalid_argument("effective_noise_variance: negative sigma_e^2");
  if (!(noise_power > 0)) throw std::invalid_argument("effective_noise_variance: sigma_n^2 must be > 0");
  return quant_noise_var * h.squaredNorm() + noise_power;
}

namespace detail {

inline void check_delta(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("SINR: delta must be > 0");
}

// |h^H p_j|^2 for every stream j (common first).
template <typename Row>
RVec stream_gains(const PrecoderMatrix& p, const Row& h_row) {
  return (h_row * p.matrix()).cwiseAbs2().transpose();
}

}  // namespace detail

/// Common-stream SINR at user k, noise normalized by delta^2. All private
/// streams act as interference.
template <typename Row>
double common_sinr(const PrecoderMatrix& p, const Row& h_row, double delta, double eta_var) {
  detail::check_delta(delta);
  const RVec g = detail::stream_gains(p, h_row);
  const double interference = g.tail(g.size() - 1).sum();
  return g(0) / (eta_var / (delta * delta) + interference);
}

/// Private-stream SINR of user k (0-based) after removing the common stream.
template <typename Row>
double private_sinr(const PrecoderMatrix& p, const Row& h_row, int k, double delta, double eta_var) {
  detail::check_delta(delta);
  const RVec g = detail::stream_gains(p, h_row);
  const double interference = g.tail(g.size() - 1).sum() - g(k + 1);
  return g(k + 1) / (eta_var / (delta * delta) + interference);
}

/// Same quantities in the delta^2-scaled form
/// delta^2 |h^H p|^2 / (sigma_eta^2 + delta^2 sum |h^H p_i|^2).
template <typename Row>
double common_sinr_scaled_form(const PrecoderMatrix& p, const Row& h_row, double delta, double eta_var) {
  detail::check_delta(delta);
  const RVec g = detail::stream_gains(p, h_row);
  const double d2 = delta * delta;
  return d2 * g(0) / (eta_var + d2 * g.tail(g.size() - 1).sum());
}

template <typename Row>
double private_sinr_scaled_form(const PrecoderMatrix& p, const Row& h_row, int k, double delta, double eta_var) {
  detail::check_delta(delta);
  const RVec g = detail::stream_gains(p, h_row);
  const double d2 = delta * delta;
  return d2 * g(k + 1) / (eta_var + d2 * (g.tail(g.size() - 1).sum() - g(k + 1)));
}

inline double shannon_rate(double sinr) { return std::log2(1.0 + sinr); }

struct StreamRates {
  RVec common;   // R_c,k
  RVec privat;   // R_k
};

inline StreamRates stream_rates(const PrecoderMatrix& p, const ChannelSet& ch, const QuantizationModel& q,
                                double noise_power) {
  const int k_users = ch.users();
  if (p.users() != k_users || p.antennas() != ch.antennas())
    throw std::invalid_argument("stream_rates: precoder/channel dimension mismatch");
  StreamRates r{RVec(k_users), RVec(k_users)};
  for (int k = 0; k < k_users; ++k) {
    const double eta = effective_noise_variance(ch.row(k), q.noise_var, noise_power);
    r.common(k) = shannon_rate(common_sinr(p, ch.row(k), q.delta, eta));
    r.privat(k) = shannon_rate(private_sinr(p, ch.row(k), k, q.delta, eta));
  }
  return r;
}

/// Common-rate shares with the private and common-stream rates they were
/// checked against.
struct RateAllocation {
  RVec c;
  RVec private_rates;
  RVec common_stream_rates;
};

/// Largest feasible common throughput min_k R_c,k (zero in SDMA), split
/// equally among the users.
inline RVec best_common_split(const StreamRates& r, AccessMode mode) {
  const auto k_users = r.common.size();
  if (mode == AccessMode::kSdma) return RVec::Zero(k_users);
  const double total = std::max(0.0, r.common.minCoeff());
  return RVec::Constant(k_users, total / static_cast<double>(k_users));
}

inline void check_common_rates(const RVec& c, const RVec& common_stream_rates, double tol = 0.0) {
  if ((c.array() < -tol).any()) throw InfeasibleRates("common rate share negative (c >= 0 violated)", -1);
  const double total = c.sum();
  for (Eigen::Index k = 0; k < common_stream_rates.size(); ++k)
    if (total > common_stream_rates(k) + tol)
      throw InfeasibleRates("sum of common rate shares exceeds R_c," + std::to_string(k + 1),
                            static_cast<int>(k));
}

/// sum_k (C_k + R_k); throws InfeasibleRates naming the violated constraint.
inline double objective_sum_rate(const PrecoderMatrix& p, const RVec& c, const ChannelSet& ch,
                                 const QuantizationModel& q, double noise_power, double tol = 1e-12) {
  if (c.size() != ch.users()) throw std::invalid_argument("objective_sum_rate: c has wrong length");
  const StreamRates r = stream_rates(p, ch, q, noise_power);
  check_common_rates(c, r.common, tol);
  return c.sum() + r.privat.sum();
}

inline RateAllocation allocate_rates(const PrecoderMatrix& p, const ChannelSet& ch, const QuantizationModel& q,
                                     double noise_power, AccessMode mode) {
  StreamRates r = stream_rates(p, ch, q, noise_power);
  RVec c = best_common_split(r, mode);
  return {std::move(c), std::move(r.privat), std::move(r.common)};
}

}  // namespace rsmajrc
