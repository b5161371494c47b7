#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rsmajrc/config.hpp"
#include "rsmajrc/types.hpp"

namespace rsmajrc {

inline constexpr double kQuantConst = kPi * 1.7320508075688772 / 2.0;  // pi sqrt(3) / 2

// 1 - delta^2 evaluated directly, free of cancellation for large b.
inline double one_minus_delta_sq(int bits) {
  if (bits < 1) throw std::invalid_argument("resolution_delta: bits must be >= 1");
  return kQuantConst * std::ldexp(1.0, -2 * bits);
}

/// delta = sqrt(1 - (pi sqrt(3)/2) 2^{-2b}).
inline double resolution_delta(int bits) { return std::sqrt(1.0 - one_minus_delta_sq(bits)); }

/// sigma_e^2 for a resolution factor in (0, 1). `kPaper` uses
/// delta^2 (1-delta^2)^2, `kAqnm` the textbook delta^2 (1-delta^2).
inline double quantization_noise_variance(double delta, NoiseVarFormula formula = NoiseVarFormula::kPaper) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw std::invalid_argument("quantization_noise_variance: delta must lie in (0, 1)");
  const double d2 = delta * delta;
  const double r = 1.0 - d2;
  return formula == NoiseVarFormula::kPaper ? d2 * r * r : d2 * r;
}

/// Same as above, evaluated from the bit count so that b beyond ~26 (where
/// delta rounds to 1) still yields a positive variance.
inline double quantization_noise_variance_for_bits(int bits, NoiseVarFormula formula = NoiseVarFormula::kPaper) {
  const double r = one_minus_delta_sq(bits);
  const double d2 = 1.0 - r;
  return formula == NoiseVarFormula::kPaper ? d2 * r * r : d2 * r;
}

/// Per-DAC power P(delta) = P_DAC sqrt(pi sqrt(3) / (2 (1 - delta^2))).
/// 1 - delta^2 is taken in closed form, so the result equals 2^b P_DAC to
/// rounding for every b.
inline double dac_power(int bits, double p_dac) {
  return p_dac * std::sqrt(kQuantConst / one_minus_delta_sq(bits));
}

struct PowerBudget {
  double total = 0;        // tr(P P^H)
  double per_antenna = 0;  // each diag(P P^H) entry
};

inline PowerBudget precoder_power_budget(double p_total, int antennas, int bits, double p_dac) {
  if (antennas < 1) throw std::invalid_argument("precoder_power_budget: antennas must be >= 1");
  const double per_dac = std::ldexp(p_dac, bits);
  const double total = p_total - antennas * per_dac;
  if (!(total > 0)) throw std::domain_error("infeasible bit count: precoder power budget is non-positive");
  return {total, p_total / antennas - per_dac};
}

/// Linear (AQNM-style) model of one DAC configuration.
struct QuantizationModel {
  int bits = 0;
  double delta = 1.0;
  double noise_var = 0.0;
  double dac_power = 0.0;

  static QuantizationModel from_config(const SystemConfig& cfg) {
    QuantizationModel m;
    m.bits = cfg.bits;
    m.delta = resolution_delta(cfg.bits);
    m.noise_var = quantization_noise_variance_for_bits(cfg.bits, cfg.noise_var_formula);
    m.dac_power = rsmajrc::dac_power(cfg.bits, cfg.p_dac);
    return m;
  }

  /// Ideal converter: delta = 1, no distortion.
  static QuantizationModel ideal() { return {}; }
};

/// delta x + e with e ~ CN(0, sigma_e^2 I) independent of x.
template <typename Rng>
CVec apply_linear_model(const CVec& x, const QuantizationModel& model, Rng& rng) {
  std::normal_distribution<double> n01(0.0, std::sqrt(model.noise_var / 2.0));
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double re = n01(rng);
    const double im = n01(rng);
    out(i) = model.delta * x(i) + cd(re, im);
  }
  return out;
}

namespace detail {

// Midrise quantizer with 2^b levels at (i + 1/2) step, clipped to the outermost level.
inline double midrise(double v, int bits, double step) {
  const double half_levels = std::ldexp(1.0, bits - 1);
  double idx = std::floor(v / step);
  idx = std::clamp(idx, -half_levels, half_levels - 1.0);
  return (idx + 0.5) * step;
}

}  // namespace detail

/// Real and imaginary parts quantized independently by a b-bit midrise
/// quantizer with full scale +/- 2^{b-1} step.
inline CVec apply_uniform_quantizer(const CVec& x, int bits, double step) {
  if (bits < 1) throw std::invalid_argument("apply_uniform_quantizer: bits must be >= 1");
  if (!(step > 0)) throw std::invalid_argument("apply_uniform_quantizer: step must be > 0");
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out(i) = cd(detail::midrise(x(i).real(), bits, step), detail::midrise(x(i).imag(), bits, step));
  return out;
}

inline constexpr double kLoadingFactor = 3.0;

/// Step giving full scale at kLoadingFactor standard deviations of each real
/// component of a complex input with the given total variance.
inline double default_quantizer_step(int bits, double input_variance = 1.0) {
  const double component_std = std::sqrt(input_variance / 2.0);
  return 2.0 * kLoadingFactor * component_std / std::ldexp(1.0, bits);
}

}  // namespace rsmajrc
