#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace rsmajrc {

/// q(z) = 1/2 z^T H z + g^T z + c with H symmetric positive semidefinite.
struct ConvexQuadratic {
  Eigen::MatrixXd hess;
  Eigen::VectorXd grad;
  double constant = 0.0;

  double value(const Eigen::VectorXd& z) const { return 0.5 * z.dot(hess * z) + grad.dot(z) + constant; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const { return hess * z + grad; }
};

struct BarrierResult {
  Eigen::VectorXd z;
  Eigen::VectorXd duals;   // one per inequality
  double objective = 0.0;
  double gap = 0.0;        // m / t at exit
  double kkt_residual = 0.0;
  int newton_steps = 0;
  bool converged = false;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Eigen::VectorXd solve_psd(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  const Eigen::VectorXd d = ldlt.vectorD();
  // a vanishing pivot leaves the null-space component of the LDLT solve arbitrary
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff()) {
    Eigen::VectorXd x = ldlt.solve(rhs);
    if (x.allFinite() && (h * x - rhs).norm() <= 1e-8 * (1.0 + rhs.norm())) return x;
  }
  // singular directions: minimum-norm solution
  return h.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace detail

/// Minimizes a convex quadratic subject to convex quadratic inequalities
/// f_i(z) <= 0 with the log-barrier method. `z0` must be strictly feasible.
/// Stops once the barrier duality gap m/t falls below `gap_tol`.
inline BarrierResult minimize_with_barrier(const ConvexQuadratic& objective,
                                           const std::vector<ConvexQuadratic>& constraints,
                                           Eigen::VectorXd z0, double gap_tol = 1e-10, int max_newton = 400) {
  const auto m = static_cast<double>(constraints.size());
  BarrierResult res;
  if (constraints.empty()) {
    res.z = detail::solve_psd(objective.hess, -objective.grad);
    res.objective = objective.value(res.z);
    res.kkt_residual = objective.gradient(res.z).norm();
    res.converged = true;
    return res;
  }
  auto slack = [&](const Eigen::VectorXd& z, Eigen::VectorXd& s) {
    s.resize(static_cast<Eigen::Index>(constraints.size()));
    for (std::size_t i = 0; i < constraints.size(); ++i) s(static_cast<Eigen::Index>(i)) = -constraints[i].value(z);
    return (s.array() > 0).all();
  };
  Eigen::VectorXd s;
  if (!slack(z0, s)) throw SolverError("barrier: starting point is not strictly feasible");

  auto phi = [&](const Eigen::VectorXd& z, double t, bool& feasible) {
    Eigen::VectorXd sl;
    feasible = slack(z, sl);
    if (!feasible) return std::numeric_limits<double>::infinity();
    return t * objective.value(z) - sl.array().log().sum();
  };

  const Eigen::Index n = z0.size();
  Eigen::VectorXd z = std::move(z0);
  double t = std::max(1.0, m / std::max(1.0, std::abs(objective.value(z))));
  constexpr double kGrowth = 20.0;
  int steps = 0;
  while (true) {
    // centering
    for (int it = 0; it < 100 && steps < max_newton; ++it, ++steps) {
      slack(z, s);
      Eigen::VectorXd grad = t * objective.gradient(z);
      Eigen::MatrixXd hess = t * objective.hess;
      for (std::size_t i = 0; i < constraints.size(); ++i) {
        const double si = s(static_cast<Eigen::Index>(i));
        const Eigen::VectorXd gi = constraints[i].gradient(z);
        grad += gi / si;
        hess += constraints[i].hess / si;
        hess.noalias() += (gi * gi.transpose()) / (si * si);
      }
      const Eigen::VectorXd dz = detail::solve_psd(hess, -grad);
      const double decrement2 = -grad.dot(dz);
      bool feasible = false;
      const double f0 = phi(z, t, feasible);
      // below this the decrement is lost in the rounding of t f(z)
      if (decrement2 / 2.0 <= 1e-12 + 1e-14 * std::abs(f0) || !dz.allFinite()) break;
      double step = 1.0;
      double f1 = f0;
      Eigen::VectorXd trial(n);
      while (true) {
        trial = z + step * dz;
        f1 = phi(trial, t, feasible);
        if (feasible && f1 <= f0 - 0.25 * step * decrement2) break;
        step *= 0.5;
        if (step < 1e-14) break;
      }
      if (step < 1e-14) break;
      z = trial;
      // no decrease beyond rounding: the centering point is as good as it gets
      if (f0 - f1 <= 1e-14 * (1.0 + std::abs(f0))) break;
    }
    if (m / t < gap_tol || steps >= max_newton) break;
    t *= kGrowth;
  }
  slack(z, s);
  res.z = z;
  res.duals = (1.0 / (t * s.array())).matrix();
  res.objective = objective.value(z);
  res.gap = m / t;
  res.newton_steps = steps;
  Eigen::VectorXd stat = objective.gradient(z);
  for (std::size_t i = 0; i < constraints.size(); ++i)
    stat += res.duals(static_cast<Eigen::Index>(i)) * constraints[i].gradient(z);
  res.kkt_residual = stat.norm();
  res.converged = res.gap < gap_tol;
  return res;
}

}  // namespace rsmajrc
