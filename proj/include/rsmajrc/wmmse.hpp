#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rsmajrc/barrier.hpp"
#include "rsmajrc/comms.hpp"
#include "rsmajrc/precoders.hpp"
#include "rsmajrc/splitting.hpp"

// Rate-WMMSE solver for the communication block of the splitting.
//
// For fixed scalar equalizers g and weights w, every stream's MSE
//   eps = |g|^2 T - 2 Re(g h^H p) + 1
// is a convex quadratic in the precoders, and (w eps - ln w - 1)/ln 2 upper
// bounds -R with equality at g = MMSE, w = 1/eps. The common-rate
// constraints sum(c) <= R_c,k are replaced by the same bound, which makes the
// precoder step a convex QCQP solved with a log barrier.

namespace rsmajrc {

/// Scalar receive filters per user: common and private stream.
struct Equalizers {
  CVec common;
  CVec privat;
};

struct StreamMse {
  RVec common;
  RVec privat;
};

struct Weights {
  RVec common;
  RVec privat;
};

struct WmmseState {
  Equalizers equalizers;
  Weights weights;
  double last_objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;
};

/// What the v-block sees of the other block: u's precoders, the dual y (over
/// the real-stacked precoder entries) and the penalty rho.
struct Consensus {
  PrecoderMatrix u_precoders;
  RVec y;
  double rho = 0.0;
};

/// Everything the rate expressions need besides the precoders.
struct Link {
  const ChannelSet* channels = nullptr;
  QuantizationModel quant;
  double noise_power = 1.0;

  // sigma_eta,k^2 / delta^2
  double normalized_noise(int k) const {
    return effective_noise_variance(channels->row(k), quant.noise_var, noise_power) / (quant.delta * quant.delta);
  }
};

namespace detail {

inline double total_received(const PrecoderMatrix& p, const Link& link, int k, bool include_common) {
  const RVec g = stream_gains(p, link.channels->row(k));
  return g.tail(g.size() - 1).sum() + (include_common ? g(0) : 0.0) + link.normalized_noise(k);
}

}  // namespace detail

/// MMSE equalizers g = (h^H p)^* / T for the common and private streams.
inline Equalizers update_equalizers(const PrecoderMatrix& p, const Link& link) {
  const int k_users = link.channels->users();
  Equalizers e{CVec(k_users), CVec(k_users)};
  for (int k = 0; k < k_users; ++k) {
    const auto row = link.channels->row(k);
    const cd gain_c = (row * p.common())(0);
    const cd gain_p = (row * p.priv(k))(0);
    e.common(k) = std::conj(gain_c) / detail::total_received(p, link, k, true);
    e.privat(k) = std::conj(gain_p) / detail::total_received(p, link, k, false);
  }
  return e;
}

/// MSE of every stream for arbitrary equalizers.
inline StreamMse stream_mse(const PrecoderMatrix& p, const Link& link, const Equalizers& e) {
  const int k_users = link.channels->users();
  StreamMse out{RVec(k_users), RVec(k_users)};
  for (int k = 0; k < k_users; ++k) {
    const auto row = link.channels->row(k);
    const cd gain_c = (row * p.common())(0);
    const cd gain_p = (row * p.priv(k))(0);
    const double tc = detail::total_received(p, link, k, true);
    const double tp = detail::total_received(p, link, k, false);
    out.common(k) = std::norm(e.common(k)) * tc - 2.0 * (e.common(k) * gain_c).real() + 1.0;
    out.privat(k) = std::norm(e.privat(k)) * tp - 2.0 * (e.privat(k) * gain_p).real() + 1.0;
  }
  return out;
}

/// w = 1 / mse
inline Weights update_weights(const StreamMse& mse) {
  auto invert = [](const RVec& m) {
    if ((m.array() <= 0.0).any()) throw std::invalid_argument("update_weights: MSE must be > 0");
    return RVec(m.cwiseInverse());
  };
  return {invert(mse.common), invert(mse.privat)};
}

/// Communication part of the augmented Lagrangian for the v-block:
/// -sum(c) - sum_k R_k(P) + y^T (x_r - u_r) + rho/2 ||x_r - u_r||^2.
inline double v_block_objective(const PrecoderMatrix& p, const RVec& c, const Consensus& cons, const Link& link) {
  const StreamRates r = stream_rates(p, *link.channels, link.quant, link.noise_power);
  const CVec diff = p.vec() - cons.u_precoders.vec();
  const Eigen::Index n = diff.size();
  const double linear = cons.y.head(n).dot(diff.real()) + cons.y.tail(n).dot(diff.imag());
  return -c.sum() - r.privat.sum() + linear + 0.5 * cons.rho * diff.squaredNorm();
}

struct SubproblemResult {
  PrecoderMatrix p;
  double common_total = 0.0;  // sum(c) certified by the WMSE bound
  double kkt_residual = 0.0;
  int newton_steps = 0;
};

/// Carries the last iterate when the precoder step fails to converge.
struct SubproblemError : SolverError {
  SubproblemError(const std::string& what, PrecoderMatrix last) : SolverError(what), last_iterate(std::move(last)) {}
  PrecoderMatrix last_iterate;
};

namespace detail {

// Complex quadratic x^H A x - 2 Re(b^H x) + c over the full vec(P).
struct ComplexQuad {
  CMat a;
  CVec b;
  double c = 0.0;
};

inline ComplexQuad stream_mse_quad(const Link& link, int k, cd g, bool common, int streams) {
  const int nt = link.channels->antennas();
  const CVec h = link.channels->row(k).adjoint();
  const CMat hh = h * h.adjoint();
  ComplexQuad q{CMat::Zero(nt * streams, nt * streams), CVec::Zero(nt * streams), 0.0};
  const double g2 = std::norm(g);
  for (int j = common ? 0 : 1; j < streams; ++j) q.a.block(j * nt, j * nt, nt, nt) = g2 * hh;
  const int target = common ? 0 : k + 1;
  q.b.segment(target * nt, nt) = std::conj(g) * h;
  q.c = g2 * link.normalized_noise(k) + 1.0;
  return q;
}

// Restricts to the free entries and converts to 1/2 z^T H z + g^T z + c over
// z = [Re x_F; Im x_F; (S)].
inline ConvexQuadratic to_real(const ComplexQuad& q, const std::vector<int>& free, double scale, int dim) {
  const auto nf = static_cast<Eigen::Index>(free.size());
  ConvexQuadratic out{RMat::Zero(dim, dim), RVec::Zero(dim), scale * q.c};
  for (Eigen::Index i = 0; i < nf; ++i) {
    for (Eigen::Index j = 0; j < nf; ++j) {
      const cd aij = q.a(free[i], free[j]);
      out.hess(i, j) = 2.0 * scale * aij.real();
      out.hess(i, nf + j) = -2.0 * scale * aij.imag();
      out.hess(nf + i, j) = 2.0 * scale * aij.imag();
      out.hess(nf + i, nf + j) = 2.0 * scale * aij.real();
    }
    out.grad(i) = -2.0 * scale * q.b(free[i]).real();
    out.grad(nf + i) = -2.0 * scale * q.b(free[i]).imag();
  }
  return out;
}

inline constexpr double kDegenerateCommonRate = 1e-12;

}  // namespace detail

/// One precoder step at fixed equalizers and weights. Minimizes the WMSE
/// surrogate plus the consensus penalty over (P, sum(c)) subject to
/// sum(c) >= 0 and the WMSE form of sum(c) <= R_c,k. Starts from `current`,
/// which must be the point the equalizers and weights were computed at.
inline SubproblemResult solve_precoder_subproblem(const WmmseState& state, const Consensus& cons, const Link& link,
                                                  AccessMode mode, const PrecoderMatrix& current,
                                                  double gap_tol = 1e-10) {
  const int k_users = link.channels->users();
  const int nt = link.channels->antennas();
  const int streams = k_users + 1;
  const int n = nt * streams;
  const double inv_ln2 = 1.0 / std::log(2.0);

  std::vector<int> free;
  for (int i = (mode == AccessMode::kSdma ? nt : 0); i < n; ++i) free.push_back(i);
  const auto nf = static_cast<int>(free.size());

  // Common-stream constraints that are not identically zero.
  std::vector<int> active;
  const StreamRates rates_now = stream_rates(current, *link.channels, link.quant, link.noise_power);
  if (mode == AccessMode::kRsma)
    for (int k = 0; k < k_users; ++k)
      if (rates_now.common(k) > detail::kDegenerateCommonRate && std::abs(state.equalizers.common(k)) > 0)
        active.push_back(k);
  const bool has_sum = mode == AccessMode::kRsma && static_cast<int>(active.size()) == k_users;
  const int dim = 2 * nf + (has_sum ? 1 : 0);

  ConvexQuadratic obj{RMat::Zero(dim, dim), RVec::Zero(dim), 0.0};
  for (int k = 0; k < k_users; ++k) {
    const auto q = detail::stream_mse_quad(link, k, state.equalizers.privat(k), false, streams);
    const ConvexQuadratic rq = detail::to_real(q, free, state.weights.privat(k) * inv_ln2, dim);
    obj.hess += rq.hess;
    obj.grad += rq.grad;
    obj.constant += rq.constant - (std::log(state.weights.privat(k)) + 1.0) * inv_ln2;
  }
  // penalty: y^T (z - u) + rho/2 ||z - u||^2 over the free entries
  const CVec xu = cons.u_precoders.vec();
  for (int i = 0; i < nf; ++i) {
    const int f = free[i];
    const double ur = xu(f).real(), ui = xu(f).imag();
    const double yr = cons.y(f), yi = cons.y(n + f);
    obj.hess(i, i) += cons.rho;
    obj.hess(nf + i, nf + i) += cons.rho;
    obj.grad(i) += yr - cons.rho * ur;
    obj.grad(nf + i) += yi - cons.rho * ui;
    obj.constant += -yr * ur - yi * ui + 0.5 * cons.rho * (ur * ur + ui * ui);
  }
  if (has_sum) obj.grad(dim - 1) = -1.0;

  std::vector<ConvexQuadratic> cons_q;
  for (int k : active) {
    const double w = state.weights.common(k);
    const auto q = detail::stream_mse_quad(link, k, state.equalizers.common(k), true, streams);
    ConvexQuadratic rq = detail::to_real(q, free, w * inv_ln2, dim);
    rq.constant -= (1.0 + std::log(w)) * inv_ln2;
    if (has_sum) rq.grad(dim - 1) = 1.0;
    cons_q.push_back(std::move(rq));
  }

  RVec z0(dim);
  const CVec x0 = current.vec();
  for (int i = 0; i < nf; ++i) {
    z0(i) = x0(free[i]).real();
    z0(nf + i) = x0(free[i]).imag();
  }
  if (has_sum) {
    z0(dim - 1) = 0.5 * rates_now.common.minCoeff();
    ConvexQuadratic nonneg{RMat::Zero(dim, dim), RVec::Zero(dim), 0.0};
    nonneg.grad(dim - 1) = -1.0;
    cons_q.push_back(std::move(nonneg));
  }

  BarrierResult br;
  try {
    br = minimize_with_barrier(obj, cons_q, z0, gap_tol);
  } catch (const SolverError& e) {
    throw SubproblemError(std::string("precoder subproblem: ") + e.what(), current);
  }
  CVec x = CVec::Zero(n);
  for (int i = 0; i < nf; ++i) x(free[i]) = cd(br.z(i), br.z(nf + i));
  PrecoderMatrix p = PrecoderMatrix::from_vec(x, nt);
  if (!br.converged || !p.all_finite())
  {
    std::ostringstream msg;
    msg << "precoder subproblem did not converge (gap " << br.gap << ", " << br.newton_steps << " Newton steps)";
    throw SubproblemError(msg.str(), p);
  }
  return {std::move(p), has_sum ? std::max(0.0, br.z(dim - 1)) : 0.0, br.kkt_residual, br.newton_steps};
}

inline constexpr int kAndersonMemory = 5;

namespace detail {

inline RVec stack_real(const PrecoderMatrix& p) {
  const CVec x = p.vec();
  RVec r(2 * x.size());
  r << x.real(), x.imag();
  return r;
}

inline PrecoderMatrix unstack_real(const RVec& r, int antennas) {
  const Eigen::Index n = r.size() / 2;
  CVec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cd(r(i), r(n + i));
  return PrecoderMatrix::from_vec(x, antennas);
}

// Type-II Anderson mixing over the last `memory` pairs (x, G(x)).
class AndersonMixer {
 public:
  explicit AndersonMixer(int memory) : memory_(memory) {}

  void push(const RVec& x, const RVec& gx) {
    const RVec f = gx - x;
    if (has_last_) {
      df_.push_back(f - last_f_);
      dg_.push_back(gx - last_g_);
      if (static_cast<int>(df_.size()) > memory_) {
        df_.erase(df_.begin());
        dg_.erase(dg_.begin());
      }
    }
    last_f_ = f;
    last_g_ = gx;
    has_last_ = true;
  }

  std::optional<RVec> extrapolate(const RVec& gx) const {
    if (df_.empty()) return std::nullopt;
    const auto m = static_cast<Eigen::Index>(df_.size());
    RMat f(last_f_.size(), m), g(last_g_.size(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
      f.col(j) = df_[static_cast<std::size_t>(j)];
      g.col(j) = dg_[static_cast<std::size_t>(j)];
    }
    RMat gram = f.transpose() * f;
    gram.diagonal().array() += 1e-12 * std::max(1.0, gram.trace());
    const RVec gamma = gram.ldlt().solve(f.transpose() * last_f_);
    if (!gamma.allFinite()) return std::nullopt;
    return RVec(gx - g * gamma);
  }

  void clear() {
    df_.clear();
    dg_.clear();
    has_last_ = false;
  }

 private:
  int memory_;
  bool has_last_ = false;
  RVec last_f_, last_g_;
  std::vector<RVec> df_, dg_;
};

}  // namespace detail

struct VUpdateResult {
  Stacked v;
  WmmseState state;
};

/// Alternates equalizer, weight and precoder steps until the v-block objective
/// decreases by less than `tol` (relative to max(1, |L|)) or `max_iter` steps
/// have run. Starts from `init` when given, else from u's precoders, else from
/// matched filtering. The returned c is the best feasible split for the final P.
/// With `accelerate`, each cycle is followed by an Anderson-mixed candidate
/// that is accepted only on strict decrease, so the sequence stays monotone.
inline VUpdateResult solve_v_update(const Consensus& cons, const Link& link, AccessMode mode, double tol,
                                    int max_iter, const std::optional<Stacked>& init = std::nullopt,
                                    double alpha = 1.0, bool accelerate = true) {
  const ChannelSet& ch = *link.channels;
  PrecoderMatrix p;
  if (init) {
    p = init->p;
    alpha = init->alpha;
  } else if (cons.u_precoders.matrix().squaredNorm() > 0) {
    p = cons.u_precoders;
  } else {
    p = matched_filter_precoders(ch, 1.0, mode);
  }
  if (mode == AccessMode::kSdma) p.common().setZero();

  auto objective = [&](const PrecoderMatrix& pm, RVec& c_out) {
    const StreamRates r = stream_rates(pm, ch, link.quant, link.noise_power);
    c_out = best_common_split(r, mode);
    return v_block_objective(pm, c_out, cons, link);
  };

  VUpdateResult out;
  RVec c;
  double current = objective(p, c);
  detail::AndersonMixer anderson(kAndersonMemory);
  out.state.objective_trace.push_back(current);
  for (int it = 0; it < max_iter; ++it) {
    out.state.equalizers = update_equalizers(p, link);
    out.state.weights = update_weights(stream_mse(p, link, out.state.equalizers));
    SubproblemResult sub = solve_precoder_subproblem(out.state, cons, link, mode, p);
    RVec c_next;
    const double next = objective(sub.p, c_next);
    ++out.state.iterations;
    const double decrease = current - next;
    if (decrease < 0) {
      // surrogate solved only to the barrier gap; never accept an ascent
      out.state.objective_trace.push_back(current);
      break;
    }
    const RVec x_prev = detail::stack_real(p);
    p = std::move(sub.p);
    c = std::move(c_next);
    current = next;
    double total_decrease = decrease;
    if (accelerate) {
      // Anderson step on the cycle map G(x_prev) = p; kept only when it lowers the objective
      const RVec gx = detail::stack_real(p);
      anderson.push(x_prev, gx);
      if (auto cand = anderson.extrapolate(gx)) {
        PrecoderMatrix trial = detail::unstack_real(*cand, p.antennas());
        if (mode == AccessMode::kSdma) trial.common().setZero();
        RVec c_trial;
        const double trial_obj = trial.all_finite() ? objective(trial, c_trial) : current;
        if (trial_obj < current) {
          total_decrease += current - trial_obj;
          p = std::move(trial);
          c = std::move(c_trial);
          current = trial_obj;
        } else {
          anderson.clear();
        }
      }
    }
    out.state.objective_trace.push_back(current);
    if (total_decrease <= tol * std::max(1.0, std::abs(current))) break;
  }
  out.state.last_objective = current;
  out.v = Stacked{alpha, std::move(c), std::move(p)};
  return out;
}

}  // namespace rsmajrc
