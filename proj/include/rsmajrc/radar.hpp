#pragma once

#include <stdexcept>

#include "rsmajrc/quantization.hpp"
#include "rsmajrc/scenario.hpp"
#include "rsmajrc/types.hpp"

namespace rsmajrc {

inline constexpr double kAlphaFloor = 1e-9;

/// R = delta^2 P P^H + sigma_e^2 I
inline CMat transmit_covariance(const PrecoderMatrix& p, double delta, double quant_noise_var) {
  CMat r = delta * delta * (p.matrix() * p.matrix().adjoint());
  r.diagonal().array() += quant_noise_var;
  return r;
}

/// a^H R a for every grid angle, evaluated as delta^2 ||P^H a||^2 + sigma_e^2 N_t.
inline RVec achieved_pattern(const PrecoderMatrix& p, double delta, double quant_noise_var, const AngleGrid& grid) {
  const double offset = quant_noise_var * p.antennas();
  const CMat proj = p.matrix().adjoint() * grid.steering_matrix;
  return (delta * delta * proj.colwise().squaredNorm().transpose()).array() + offset;
}

/// Same pattern through the explicit covariance matrix.
inline RVec achieved_pattern_from_covariance(const CMat& r, const AngleGrid& grid) {
  RVec out(grid.size());
  for (int m = 0; m < grid.size(); ++m) out(m) = (grid.steering[m].adjoint() * r * grid.steering[m])(0).real();
  return out;
}

inline double pattern_error(double alpha, const RVec& achieved, const RVec& desired) {
  return (alpha * desired - achieved).squaredNorm();
}

/// sum_m |alpha P_d - delta^2 a^H P P^H a - sigma_e^2 N_t|^2
inline double beampattern_error(double alpha, const PrecoderMatrix& p, double delta, double quant_noise_var,
                                const AngleGrid& grid) {
  if (!(alpha > 0)) throw std::invalid_argument("beampattern_error: alpha must be > 0");
  return pattern_error(alpha, achieved_pattern(p, delta, quant_noise_var, grid), grid.desired);
}

/// Least-squares scale of the desired pattern onto an achieved pattern,
/// floored at kAlphaFloor.
inline double optimal_alpha(const RVec& achieved, const RVec& desired) {
  const double den = desired.squaredNorm();
  if (!(den > 0)) throw std::invalid_argument("optimal_alpha: desired pattern is identically zero");
  return std::max(kAlphaFloor, desired.dot(achieved) / den);
}

inline double optimal_alpha(const PrecoderMatrix& p, double delta, double quant_noise_var, const AngleGrid& grid) {
  return optimal_alpha(achieved_pattern(p, delta, quant_noise_var, grid), grid.desired);
}

inline double nmse(double alpha, const RVec& achieved, const RVec& desired) {
  if (!(alpha > 0)) throw std::invalid_argument("nmse: alpha must be > 0");
  return pattern_error(alpha, achieved, desired) / (alpha * alpha * desired.squaredNorm());
}

inline double nmse(double alpha, const PrecoderMatrix& p, double delta, double quant_noise_var,
                   const AngleGrid& grid) {
  return nmse(alpha, achieved_pattern(p, delta, quant_noise_var, grid), grid.desired);
}

struct BeampatternReport {
  RVec achieved;
  double alpha = 1.0;
  double error = 0.0;
  double nmse = 0.0;
};

/// Evaluates the pattern at a given alpha, or at the least-squares alpha when
/// `alpha` is not positive.
inline BeampatternReport beampattern_report(const PrecoderMatrix& p, const QuantizationModel& q,
                                            const AngleGrid& grid, double alpha = 0.0) {
  BeampatternReport rep;
  rep.achieved = achieved_pattern(p, q.delta, q.noise_var, grid);
  rep.alpha = alpha > 0 ? alpha : optimal_alpha(rep.achieved, grid.desired);
  rep.error = pattern_error(rep.alpha, rep.achieved, grid.desired);
  rep.nmse = nmse(rep.alpha, rep.achieved, grid.desired);
  return rep;
}

}  // namespace rsmajrc
