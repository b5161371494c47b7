#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rsmajrc/barrier.hpp"
#include "rsmajrc/precoders.hpp"
#include "rsmajrc/quantization.hpp"
#include "rsmajrc/radar.hpp"
#include "rsmajrc/splitting.hpp"

// Semidefinite relaxation of the radar block of the splitting.
//
// With x = vec(P) and the bordered matrix W = [X x; x^H 1] >= 0, the radiated
// covariance is U_p = sum_j X_jj (the diagonal N_t x N_t stream blocks of X),
// which turns the beampattern error into a convex quadratic in (X, alpha). The
// consensus penalty is linear in x once the per-antenna constraint fixes
// ||x||^2. The relaxation is solved by ADMM on the PSD cone; a rank-one point
// is then recovered and refined locally on the constraint manifold.

namespace rsmajrc {

/// Data of one u-step.
struct LiftedProblem {
  int users = 0;
  int antennas = 0;
  double lambda = 0.0;
  double rho = 0.0;
  double delta = 1.0;
  double quant_noise_var = 0.0;
  double per_antenna = 0.0;
  double alpha_init = 1.0;
  bool common_pinned = false;  // SDMA: p_c = 0
  const AngleGrid* grid = nullptr;
  CVec v_precoders;  // x_v
  CVec y;            // complex dual, y_re + j y_im
  CVec linear;       // rho x_v + y; the lifted objective contains -Re(linear^H x)
  double constant = 0.0;  // rho/2 ||x_v||^2 + Re(y^H x_v)

  int streams() const { return users + 1; }
  int lifted_size() const { return antennas * streams(); }
  int bordered_size() const { return lifted_size() + 1; }
  double total_budget() const { return per_antenna * antennas; }
};

inline LiftedProblem build_lifted_problem(const Stacked& v, const RVec& y, double rho, const QuantizationModel& q,
                                          const AngleGrid& grid, const PowerBudget& budget, double lambda,
                                          double alpha_init, bool common_pinned = false) {
  if (!(budget.per_antenna > 0)) throw std::domain_error("infeasible bit count: non-positive precoder budget");
  LiftedProblem lp;
  lp.users = v.users();
  lp.antennas = v.antennas();
  lp.lambda = lambda;
  lp.rho = rho;
  lp.delta = q.delta;
  lp.quant_noise_var = q.noise_var;
  lp.per_antenna = budget.per_antenna;
  lp.alpha_init = std::max(kAlphaFloor, alpha_init);
  lp.common_pinned = common_pinned;
  lp.grid = &grid;
  lp.v_precoders = v.p.vec();
  const Eigen::Index n = lp.v_precoders.size();
  if (y.size() != 2 * n) throw std::invalid_argument("build_lifted_problem: dual has wrong length");
  lp.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) lp.y(i) = cd(y(i), y(n + i));
  lp.linear = rho * lp.v_precoders + lp.y;
  lp.constant = 0.5 * rho * lp.v_precoders.squaredNorm() + lp.y.dot(lp.v_precoders).real();
  return lp;
}

/// U_p = D_c X D_c^H + sum_k D_k X D_k^H for the lifted block X (n x n or bordered).
inline CMat lifted_covariance(const CMat& w, const LiftedProblem& lp) {
  const int nt = lp.antennas;
  CMat u = CMat::Zero(nt, nt);
  for (int j = 0; j < lp.streams(); ++j) u += w.block(j * nt, j * nt, nt, nt);
  return u;
}

/// Relaxed objective at a bordered matrix W and alpha. On W = [x;1][x;1]^H it
/// equals the u-part of the augmented Lagrangian at P = unvec(x).
inline double lifted_objective(const CMat& w, double alpha, const LiftedProblem& lp) {
  const int n = lp.lifted_size();
  const CMat u = lifted_covariance(w, lp);
  const AngleGrid& g = *lp.grid;
  const double offset = lp.quant_noise_var * lp.antennas;
  double err = 0.0;
  for (int m = 0; m < g.size(); ++m) {
    const double pat = (g.steering[m].adjoint() * u * g.steering[m])(0).real();
    const double r = alpha * g.desired(m) - offset - lp.delta * lp.delta * pat;
    err += r * r;
  }
  const CVec x = w.col(n).head(n);
  return lp.lambda * err - lp.linear.dot(x).real() + 0.5 * lp.rho * u.trace().real() + lp.constant;
}

/// The same objective evaluated directly on precoders (no lifting).
inline double u_block_objective(const PrecoderMatrix& p, double alpha, const LiftedProblem& lp) {
  const double err = beampattern_error(alpha, p, lp.delta, lp.quant_noise_var, *lp.grid);
  const CVec x = p.vec();
  return lp.lambda * err - lp.linear.dot(x).real() + 0.5 * lp.rho * x.squaredNorm() + lp.constant;
}

/// Relaxation iterate with everything needed to warm start the next solve.
struct LiftedSolution {
  CMat w;             // feasible PSD bordered matrix
  double alpha = 1.0;
  RVec c;             // copied from v
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  // ADMM state
  CMat z, dual;
  double alpha_z = 1.0, alpha_dual = 0.0, sigma = 0.0;
};

namespace detail {

// Real isometric coordinates of a Hermitian N_t x N_t matrix: diagonal, then
// sqrt(2) Re and sqrt(2) Im of the strict upper triangle.
struct HermitianCoords {
  int nt = 0;
  std::vector<std::pair<int, int>> upper;

  explicit HermitianCoords(int n) : nt(n) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) upper.emplace_back(i, j);
  }
  int dim() const { return nt * nt; }

  RVec pack(const CMat& u) const {
    RVec out(dim());
    for (int i = 0; i < nt; ++i) out(i) = u(i, i).real();
    const auto nu = static_cast<int>(upper.size());
    for (int t = 0; t < nu; ++t) {
      const auto [i, j] = upper[t];
      out(nt + t) = std::sqrt(2.0) * u(i, j).real();
      out(nt + nu + t) = std::sqrt(2.0) * u(i, j).imag();
    }
    return out;
  }

  CMat unpack(const RVec& v) const {
    CMat u = CMat::Zero(nt, nt);
    for (int i = 0; i < nt; ++i) u(i, i) = v(i);
    const auto nu = static_cast<int>(upper.size());
    for (int t = 0; t < nu; ++t) {
      const auto [i, j] = upper[t];
      const cd val(v(nt + t) / std::sqrt(2.0), v(nt + nu + t) / std::sqrt(2.0));
      u(i, j) = val;
      u(j, i) = std::conj(val);
    }
    return u;
  }

  // g with g^T pack(U) = a^H U a
  RVec quadratic_form(const CVec& a) const {
    RVec g(dim());
    for (int i = 0; i < nt; ++i) g(i) = std::norm(a(i));
    const auto nu = static_cast<int>(upper.size());
    for (int t = 0; t < nu; ++t) {
      const auto [i, j] = upper[t];
      const cd s = std::conj(a(i)) * a(j);
      g(nt + t) = std::sqrt(2.0) * s.real();
      g(nt + nu + t) = -std::sqrt(2.0) * s.imag();
    }
    return g;
  }
};

inline CMat project_psd(const CMat& a) {
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  RVec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Makes a PSD matrix satisfy the affine constraints exactly by a diagonal
// congruence (per-antenna scaling across streams, unit corner).
inline CMat restore_feasibility(CMat z, const LiftedProblem& lp) {
  const int nt = lp.antennas;
  const int n = lp.lifted_size();
  if (lp.common_pinned) {
    z.block(0, 0, nt, n + 1).setZero();
    z.block(0, 0, n + 1, nt).setZero();
  }
  RVec scale = RVec::Ones(n + 1);
  const CMat u = lifted_covariance(z, lp);
  for (int a = 0; a < nt; ++a) {
    const double d = u(a, a).real();
    const double s = d > 0 ? std::sqrt(lp.per_antenna / d) : 1.0;
    for (int j = 0; j < lp.streams(); ++j) scale(j * nt + a) = s;
  }
  const double corner = z(n, n).real();
  if (corner > 0) scale(n) = 1.0 / std::sqrt(corner);
  CMat out = scale.asDiagonal() * z * scale.asDiagonal();
  out = 0.5 * (out + out.adjoint()).eval();
  return out;
}

}  // namespace detail

/// Solves the relaxation to primal/dual residuals below `tol` (relative to
/// the iterate scale). Warm starts from `warm` when its dimensions match.
inline LiftedSolution solve_lifted(const LiftedProblem& lp, double tol = 1e-6, int max_iter = 20000,
                                   const LiftedSolution* warm = nullptr, const RVec* c_block = nullptr) {
  const int nt = lp.antennas;
  const int n = lp.lifted_size();
  const int big = n + 1;
  const int streams = lp.streams();
  const AngleGrid& grid = *lp.grid;
  const int m_angles = grid.size();
  const detail::HermitianCoords coords(nt);
  const int du = coords.dim();
  const int dw = du + 1;  // [u; alpha]
  const double d2 = lp.delta * lp.delta;
  const double offset = lp.quant_noise_var * nt;

  // residual_m = G_m . [u; alpha] - offset
  RMat g(m_angles, dw);
  for (int m = 0; m < m_angles; ++m) {
    g.row(m).head(du) = -d2 * coords.quadratic_form(grid.steering[m]).transpose();
    g(m, du) = grid.desired(m);
  }
  const RMat gtg = 2.0 * lp.lambda * g.transpose() * g;
  const RVec gt_off = 2.0 * lp.lambda * offset * g.transpose() * RVec::Ones(m_angles);
  RVec trace_vec = RVec::Zero(dw);
  trace_vec.head(nt).setOnes();

  // KKT system for the reduced W-step.
  RMat e = RMat::Zero(nt, dw);
  for (int a = 0; a < nt; ++a) e(a, a) = 1.0;
  const int first = lp.common_pinned ? 1 : 0;
  const double block_weight = 1.0 / (streams - first);
  Eigen::PartialPivLU<RMat> kkt;
  auto factor = [&](double sigma) {
    RMat k = RMat::Zero(dw + nt, dw + nt);
    k.topLeftCorner(dw, dw) = gtg;
    for (int i = 0; i < du; ++i) k(i, i) += sigma * block_weight;
    k(du, du) += sigma;
    k.topRightCorner(dw, nt) = e.transpose();
    k.bottomLeftCorner(nt, dw) = e;
    kkt.compute(k);
  };

  CMat z, lam;
  double beta, mu, sigma;
  if (warm && warm->z.rows() == big && warm->sigma > 0) {
    z = warm->z;
    lam = warm->dual;
    beta = warm->alpha_z;
    mu = warm->alpha_dual;
    sigma = warm->sigma;
  } else {
    z = CMat::Zero(big, big);
    z(n, n) = 1.0;
    for (int j = first; j < streams; ++j)
      for (int a = 0; a < nt; ++a) z(j * nt + a, j * nt + a) = lp.per_antenna * block_weight;
    lam = CMat::Zero(big, big);
    beta = lp.alpha_init;
    mu = 0.0;
    sigma = std::max(1.0, std::sqrt(gtg.diagonal().maxCoeff()));
  }
  factor(sigma);

  constexpr double kRelax = 1.6;
  LiftedSolution sol;
  CMat w(big, big);
  double alpha = beta;
  int it = 0;
  double rp = 0.0, rd = 0.0;
  for (; it < max_iter; ++it) {
    const CMat t = z - lam;
    const double t_alpha = beta - mu;
    // W-step
    w = t;
    w.col(n).head(n) = t.col(n).head(n) + lp.linear / (2.0 * sigma);
    w.row(n).head(n) = w.col(n).head(n).adjoint();
    w(n, n) = 1.0;
    CMat t_u = CMat::Zero(nt, nt);
    for (int j = first; j < streams; ++j) t_u += t.block(j * nt, j * nt, nt, nt);
    RVec rhs(dw + nt);
    rhs.head(dw) = gt_off - 0.5 * lp.rho * trace_vec;
    rhs.head(du) += sigma * block_weight * coords.pack(t_u);
    rhs(du) += sigma * t_alpha;
    rhs.tail(nt).setConstant(lp.per_antenna);
    const RVec sol_u = kkt.solve(rhs);
    const CMat u_new = coords.unpack(sol_u.head(du));
    alpha = sol_u(du);
    const CMat shift = (u_new - t_u) * block_weight;
    for (int j = first; j < streams; ++j) w.block(j * nt, j * nt, nt, nt) = t.block(j * nt, j * nt, nt, nt) + shift;
    if (lp.common_pinned) {
      w.block(0, 0, nt, big).setZero();
      w.block(0, 0, big, nt).setZero();
    }

    // cone step with over-relaxation
    const CMat w_hat = kRelax * w + (1.0 - kRelax) * z;
    const double a_hat = kRelax * alpha + (1.0 - kRelax) * beta;
    const CMat z_prev = z;
    const double beta_prev = beta;
    z = detail::project_psd(w_hat + lam);
    beta = std::max(kAlphaFloor, a_hat + mu);
    lam += w_hat - z;
    mu += a_hat - beta;

    rp = std::sqrt((w - z).squaredNorm() + (alpha - beta) * (alpha - beta));
    rd = sigma * std::sqrt((z - z_prev).squaredNorm() + (beta - beta_prev) * (beta - beta_prev));
    const double scale_p = std::max({w.norm(), z.norm(), 1.0});
    const double scale_d = std::max(sigma * std::sqrt(lam.squaredNorm() + mu * mu), 1.0);
    if (rp <= tol * scale_p && rd <= tol * scale_d) {
      ++it;
      break;
    }
    if (it % 25 == 24) {
      const double ratio = (rp / scale_p) / std::max(rd / scale_d, 1e-300);
      if (ratio > 10.0 || ratio < 0.1) {
        const double f = ratio > 10.0 ? 2.0 : 0.5;
        sigma *= f;
        lam /= f;
        mu /= f;
        factor(sigma);
      }
    }
  }

  sol.z = z;
  sol.dual = lam;
  sol.alpha_z = beta;
  sol.alpha_dual = mu;
  sol.sigma = sigma;
  sol.w = detail::restore_feasibility(z, lp);
  sol.alpha = beta;
  sol.c = c_block ? *c_block : RVec::Zero(lp.users);
  sol.objective = lifted_objective(sol.w, sol.alpha, lp);
  sol.primal_residual = rp;
  sol.dual_residual = rd;
  sol.iterations = it;
  sol.converged = it < max_iter;
  return sol;
}

struct RankOneRecovery {
  PrecoderMatrix p;
  double alpha = 1.0;
  double objective = 0.0;
  double rank_one_gap = 0.0;  // lambda_2 / lambda_1 of W
  bool used_eigenvector = false;
};

/// Candidate precoders from the homogenized column of W (dominant eigenvector
/// when that column vanishes), projected onto the per-antenna budget; alpha is
/// the least-squares scale for the recovered pattern. With
/// `randomization_samples` > 0, Gaussian samples from W compete as well.
inline RankOneRecovery recover_rank_one(const CMat& w, const LiftedProblem& lp, int randomization_samples = 0,
                                        std::uint64_t seed = 0) {
  const int n = lp.lifted_size();
  const int nt = lp.antennas;
  Eigen::SelfAdjointEigenSolver<CMat> es(w);
  const RVec ev = es.eigenvalues();
  RankOneRecovery out;
  out.rank_one_gap = ev(n) > 0 ? std::max(0.0, ev(n - 1)) / ev(n) : 0.0;

  auto finish = [&](CVec x) {
    PrecoderMatrix p = PrecoderMatrix::from_vec(x, nt);
    if (lp.common_pinned) p.common().setZero();
    p = project_to_antenna_budget(std::move(p), lp.per_antenna, lp.common_pinned);
    const double alpha = optimal_alpha(p, lp.delta, lp.quant_noise_var, *lp.grid);
    return std::make_pair(std::move(p), alpha);
  };

  CVec x = w.col(n).head(n);
  if (x.norm() <= 1e-9 * std::sqrt(lp.total_budget())) {
    const CVec e = es.eigenvectors().col(n);
    x = std::abs(e(n)) > 1e-9 ? CVec(e.head(n) / e(n)) : CVec(e.head(n) * std::sqrt(ev(n)));
    out.used_eigenvector = true;
  }
  auto [p, alpha] = finish(x);
  out.p = std::move(p);
  out.alpha = alpha;
  out.objective = u_block_objective(out.p, out.alpha, lp);

  if (randomization_samples > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
    const CMat factor = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    for (int s = 0; s < randomization_samples; ++s) {
      CVec r(n + 1);
      for (int i = 0; i <= n; ++i) {
        const double re = n01(rng);
        const double im = n01(rng);
        r(i) = cd(re, im);
      }
      const CVec xi = factor * r;
      const CVec cand = std::abs(xi(n)) > 1e-12 ? CVec(xi.head(n) * (std::conj(xi(n)) / std::abs(xi(n))))
                                                 : CVec(xi.head(n));
      auto [pc, ac] = finish(cand);
      const double obj = u_block_objective(pc, ac, lp);
      if (obj < out.objective) {
        out.p = std::move(pc);
        out.alpha = ac;
        out.objective = obj;
      }
    }
  }
  return out;
}

struct RefineResult {
  PrecoderMatrix p;
  double alpha = 1.0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Local descent of the u-block objective over precoders with fixed
/// per-antenna power, alpha set to its least-squares value at every point.
/// Barzilai-Borwein steps with Armijo backtracking and row normalization as
/// the retraction.
inline RefineResult refine_on_antenna_sphere(PrecoderMatrix p, const LiftedProblem& lp, int max_iter = 3000,
                                             double grad_tol = 1e-10) {
  const AngleGrid& grid = *lp.grid;
  const double d2 = lp.delta * lp.delta;
  const int nt = lp.antennas;
  const CMat lin = Eigen::Map<const CMat>(lp.linear.data(), nt, lp.streams());

  auto evaluate = [&](const PrecoderMatrix& pm, double& alpha, CMat* grad) {
    const RVec pat = achieved_pattern(pm, lp.delta, lp.quant_noise_var, grid);
    alpha = optimal_alpha(pat, grid.desired);
    const RVec res = alpha * grid.desired - pat;
    const CVec x = pm.vec();
    const double obj = lp.lambda * res.squaredNorm() - lp.linear.dot(x).real() + 0.5 * lp.rho * x.squaredNorm() +
                       lp.constant;
    if (grad) {
      const CMat me = grid.steering_matrix * res.asDiagonal() * grid.steering_matrix.adjoint();
      CMat g = -4.0 * lp.lambda * d2 * me * pm.matrix() - lin + lp.rho * pm.matrix();
      if (lp.common_pinned) g.col(0).setZero();
      // tangent projection per row
      for (int a = 0; a < nt; ++a) {
        const double nrm2 = pm.matrix().row(a).squaredNorm();
        if (nrm2 > 0) {
          const double radial = (pm.matrix().row(a).conjugate().cwiseProduct(g.row(a))).sum().real() / nrm2;
          g.row(a) -= radial * pm.matrix().row(a);
        }
      }
      *grad = std::move(g);
    }
    return obj;
  };
  auto retract = [&](const CMat& m) {
    PrecoderMatrix q(m);
    if (lp.common_pinned) q.common().setZero();
    return project_to_antenna_budget(std::move(q), lp.per_antenna, lp.common_pinned);
  };

  p = retract(p.matrix());
  RefineResult out;
  CMat grad;
  double alpha = 1.0;
  double obj = evaluate(p, alpha, &grad);
  double step = 1.0 / std::max(1.0, 4.0 * lp.lambda * d2 * grid.size() * nt * nt * lp.per_antenna + lp.rho);
  CMat prev_p, prev_g;
  int it = 0;
  for (; it < max_iter; ++it) {
    const double gn = grad.norm();
    if (gn <= grad_tol * std::max(1.0, std::abs(obj))) break;
    if (it > 0) {
      const CMat sp = p.matrix() - prev_p;
      const CMat sg = grad - prev_g;
      const double sy = (sp.conjugate().cwiseProduct(sg)).sum().real();
      if (sy > 0) step = sp.squaredNorm() / sy;
    }
    double trial_alpha = alpha;
    CMat trial_grad;
    PrecoderMatrix trial;
    double trial_obj = obj;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = retract(p.matrix() - step * grad);
      trial_obj = evaluate(trial, trial_alpha, nullptr);
      if (trial_obj <= obj - 1e-4 * step * gn * gn) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_p = p.matrix();
    prev_g = grad;
    p = std::move(trial);
    obj = evaluate(p, alpha, &grad);
  }
  out.p = std::move(p);
  out.alpha = alpha;
  out.objective = obj;
  out.gradient_norm = grad.norm();
  out.iterations = it;
  return out;
}

struct UUpdateOptions {
  double sdr_tol = 1e-6;
  int sdr_max_iter = 20000;
  int randomization_samples = 0;
  std::uint64_t seed = 0;
  bool refine = true;
};

struct UUpdateResult {
  Stacked u;
  double objective = 0.0;          // u-part of the augmented Lagrangian
  double relaxed_objective = 0.0;  // lower bound from the relaxation
  double rank_one_gap = 0.0;
  bool from_relaxation = false;    // winning candidate came from the SDR
  LiftedSolution lifted;
};

/// Radar block step: alpha refresh, lifting, relaxation solve, rank-one
/// recovery, then local refinement of the recovered point and of `previous`
/// (when given); the better one is returned. The c-block is copied from v.
inline UUpdateResult solve_u_update(const Stacked& v, const RVec& y, double rho, const QuantizationModel& q,
                                    const AngleGrid& grid, const PowerBudget& budget, double lambda,
                                    bool common_pinned, const UUpdateOptions& opt = {},
                                    const Stacked* previous = nullptr, const LiftedSolution* warm = nullptr) {
  const PrecoderMatrix start =
      previous ? previous->p
               : project_to_antenna_budget(v.p, budget.per_antenna, common_pinned);
  const double alpha0 = optimal_alpha(start, q.delta, q.noise_var, grid);
  const LiftedProblem lp = build_lifted_problem(v, y, rho, q, grid, budget, lambda, alpha0, common_pinned);

  UUpdateResult out;
  out.lifted = solve_lifted(lp, opt.sdr_tol, opt.sdr_max_iter, warm, &v.c);
  out.relaxed_objective = out.lifted.objective;
  RankOneRecovery rec = recover_rank_one(out.lifted.w, lp, opt.randomization_samples, opt.seed);
  out.rank_one_gap = rec.rank_one_gap;

  PrecoderMatrix best_p = rec.p;
  double best_alpha = rec.alpha;
  double best_obj = rec.objective;
  out.from_relaxation = true;
  if (opt.refine) {
    RefineResult r1 = refine_on_antenna_sphere(rec.p, lp);
    best_p = std::move(r1.p);
    best_alpha = r1.alpha;
    best_obj = r1.objective;
    RefineResult r2 = refine_on_antenna_sphere(start, lp);
    if (r2.objective < best_obj) {
      best_p = std::move(r2.p);
      best_alpha = r2.alpha;
      best_obj = r2.objective;
      out.from_relaxation = false;
    }
  } else if (previous) {
    const double prev_obj = u_block_objective(start, alpha0, lp);
    if (prev_obj < best_obj) {
      best_p = start;
      best_alpha = alpha0;
      best_obj = prev_obj;
      out.from_relaxation = false;
    }
  }
  out.u = Stacked{best_alpha, v.c, std::move(best_p)};
  out.objective = best_obj;
  return out;
}

}  // namespace rsmajrc
