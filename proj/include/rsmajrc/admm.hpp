#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rsmajrc/comms.hpp"
#include "rsmajrc/config.hpp"
#include "rsmajrc/precoders.hpp"
#include "rsmajrc/quantization.hpp"
#include "rsmajrc/radar.hpp"
#include "rsmajrc/scenario.hpp"
#include "rsmajrc/sdr.hpp"
#include "rsmajrc/splitting.hpp"
#include "rsmajrc/wmmse.hpp"

namespace rsmajrc {

struct TraceEntry {
  int iter = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double lagrangian = 0.0;
  double sum_rate = 0.0;
  double nmse = 0.0;
};

struct AdmmState {
  RVec v_r, u_r, y;
  int t = 0;
  RVec r, q;
  std::vector<TraceEntry> trace;
};

struct Solution {
  AccessMode mode = AccessMode::kRsma;
  int bits = 0;
  double lambda = 0.0;
  PrecoderMatrix p;
  RVec c;
  double alpha = 1.0;
  double sum_rate = 0.0;
  double nmse = 0.0;
  double objective = 0.0;  // sum-rate - lambda * beampattern error
  int iterations = 0;
  bool converged = false;
  bool max_iter_reached = false;
  bool warm_started = false;       // RSMA run seeded from a converged SDMA run
  bool kept_warm_start = false;    // the SDMA point beat the RSMA iterate
  double max_rank_one_gap = 0.0;
  std::vector<TraceEntry> trace;
  std::vector<TraceEntry> warm_start_trace;
};

struct AdmmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// r = D_pr (v_r - u_r), q = D_pr (u_r - u_r_prev)
inline std::pair<RVec, RVec> residuals(const RVec& v_r, const RVec& u_r, const RVec& u_r_prev,
                                       const SplitOperators& ops) {
  return {ops.apply_pr(v_r - u_r), ops.apply_pr(u_r - u_r_prev)};
}

/// y + rho D_pr (v_r - u_r)
inline RVec dual_update(const RVec& y, double rho, const RVec& v_r, const RVec& u_r, const SplitOperators& ops) {
  return y + rho * ops.apply_pr(v_r - u_r);
}

struct Metrics {
  double sum_rate = 0.0;
  double nmse = 0.0;
  double nmse_db = 0.0;
  double alpha = 1.0;
  double beampattern_error = 0.0;
  double objective = 0.0;
  double precoder_power = 0.0;
  double max_antenna_power_error = 0.0;
  double common_rate_slack = 0.0;  // min_k R_c,k - sum(c)
};

namespace detail {

inline Metrics compute_metrics(const PrecoderMatrix& p, const RVec& c, double alpha, const ChannelSet& ch,
                               const QuantizationModel& q, double noise_power, const AngleGrid& grid,
                               double lambda, double per_antenna) {
  Metrics m;
  const StreamRates r = stream_rates(p, ch, q, noise_power);
  m.sum_rate = c.sum() + r.privat.sum();
  m.alpha = alpha;
  const RVec pat = achieved_pattern(p, q.delta, q.noise_var, grid);
  m.beampattern_error = pattern_error(alpha, pat, grid.desired);
  m.nmse = nmse(alpha, pat, grid.desired);
  m.nmse_db = 10.0 * std::log10(std::max(m.nmse, 1e-300));
  m.objective = m.sum_rate - lambda * m.beampattern_error;
  m.precoder_power = p.total_power();
  m.max_antenna_power_error = (p.antenna_powers().array() - per_antenna).abs().maxCoeff();
  m.common_rate_slack = r.common.minCoeff() - c.sum();
  return m;
}

}  // namespace detail

/// Recomputes sum-rate and NMSE from the stored precoders; when the solution
/// carries a trace, its final entry must agree within 1e-9.
inline Metrics evaluate(const Solution& s, const ChannelSet& ch, const QuantizationModel& q, double noise_power,
                        const AngleGrid& grid, double per_antenna) {
  RVec c = s.c.size() == ch.users() ? s.c : RVec::Zero(ch.users());
  const double alpha = s.alpha > 0 ? s.alpha : 1.0;
  Metrics m = detail::compute_metrics(s.p, c, alpha, ch, q, noise_power, grid, s.lambda, per_antenna);
  if (!s.trace.empty()) {
    const TraceEntry& last = s.trace.back();
    if (std::abs(last.sum_rate - m.sum_rate) > 1e-9 || std::abs(last.nmse - m.nmse) > 1e-9)
      throw ConsistencyError("evaluate: recomputed metrics disagree with the trace");
  }
  return m;
}

namespace detail {

struct RunContext {
  const SystemConfig& cfg;
  const ChannelSet& ch;
  const AngleGrid& grid;
  QuantizationModel q;
  PowerBudget budget;
  SplitOperators ops;
};

inline Solution run_admm(const RunContext& ctx, AccessMode mode, const std::optional<PrecoderMatrix>& init) {
  const SystemConfig& cfg = ctx.cfg;
  const bool pinned = mode == AccessMode::kSdma;
  const Link link{&ctx.ch, ctx.q, cfg.noise_power};
  const int k_users = ctx.ch.users();
  const int nt = ctx.ch.antennas();

  PrecoderMatrix p0 = init ? *init : matched_filter_precoders(ctx.ch, ctx.budget.total, mode);
  if (pinned) p0.common().setZero();
  p0 = project_to_antenna_budget(std::move(p0), ctx.budget.per_antenna, pinned);

  auto split_for = [&](const PrecoderMatrix& p) {
    return best_common_split(stream_rates(p, ctx.ch, ctx.q, cfg.noise_power), mode);
  };
  Stacked u{optimal_alpha(p0, ctx.q.delta, ctx.q.noise_var, ctx.grid), split_for(p0), p0};
  Stacked v = u;
  AdmmState st;
  st.y = RVec::Zero(2 * nt * (k_users + 1));
  st.u_r = u.to_real();

  UUpdateOptions uopt;
  uopt.sdr_tol = cfg.sdr_tol;
  uopt.randomization_samples = cfg.randomization_samples;
  uopt.seed = cfg.seed;
  std::optional<LiftedSolution> lifted;

  Solution sol;
  sol.mode = mode;
  sol.bits = cfg.bits;
  sol.lambda = cfg.lambda;
  for (st.t = 0; st.t < cfg.admm_max_iter; ++st.t) {
    try {
      const Consensus cons{u.p, st.y, cfg.rho};
      v = solve_v_update(cons, link, mode, cfg.wmmse_tol, cfg.wmmse_max_iter, v).v;
      UUpdateResult ur = solve_u_update(v, st.y, cfg.rho, ctx.q, ctx.grid, ctx.budget, cfg.lambda, pinned, uopt,
                                        &u, lifted ? &*lifted : nullptr);
      sol.max_rank_one_gap = std::max(sol.max_rank_one_gap, ur.rank_one_gap);
      lifted = std::move(ur.lifted);
      u = std::move(ur.u);
    } catch (const std::exception& e) {
      throw AdmmError("ADMM iteration " + std::to_string(st.t) + ": " + e.what());
    }
    st.v_r = v.to_real();
    const RVec u_prev = st.u_r;
    st.u_r = u.to_real();
    st.y = dual_update(st.y, cfg.rho, st.v_r, st.u_r, ctx.ops);
    std::tie(st.r, st.q) = residuals(st.v_r, st.u_r, u_prev, ctx.ops);
    if (cfg.textbook_dual_residual) st.q *= cfg.rho;

    u.c = split_for(u.p);
    const Metrics m = compute_metrics(u.p, u.c, u.alpha, ctx.ch, ctx.q, cfg.noise_power, ctx.grid, cfg.lambda,
                                      ctx.budget.per_antenna);
    const StreamRates rv = stream_rates(v.p, ctx.ch, ctx.q, cfg.noise_power);
    const double f_c = -(v.c.sum() + rv.privat.sum());
    const double f_r = cfg.lambda * m.beampattern_error;
    TraceEntry e;
    e.iter = st.t + 1;
    e.primal_residual = st.r.norm();
    e.dual_residual = st.q.norm();
    e.lagrangian = f_c + f_r + st.y.dot(st.r) + 0.5 * cfg.rho * st.r.squaredNorm();
    e.sum_rate = m.sum_rate;
    e.nmse = m.nmse;
    st.trace.push_back(e);
    if (e.primal_residual <= cfg.admm_tol && e.dual_residual <= cfg.admm_tol) {
      sol.converged = true;
      ++st.t;
      break;
    }
  }
  sol.iterations = st.t;
  sol.max_iter_reached = !sol.converged;
  sol.p = u.p;
  sol.c = u.c;
  sol.alpha = u.alpha;
  const Metrics m = compute_metrics(u.p, u.c, u.alpha, ctx.ch, ctx.q, cfg.noise_power, ctx.grid, cfg.lambda,
                                    ctx.budget.per_antenna);
  sol.sum_rate = m.sum_rate;
  sol.nmse = m.nmse;
  sol.objective = m.objective;
  sol.trace = std::move(st.trace);
  return sol;
}

// SDMA precoders with a matched-filter common stream carrying `share` of the power.
inline PrecoderMatrix inject_common_stream(const PrecoderMatrix& sdma, const ChannelSet& ch, double total,
                                           double share) {
  PrecoderMatrix p = sdma;
  const PrecoderMatrix mf = matched_filter_precoders(ch, total, AccessMode::kRsma, share);
  for (int k = 0; k < p.users(); ++k) p.priv(k) *= std::sqrt(1.0 - share);
  p.common() = mf.common();
  return p;
}

inline constexpr double kWarmStartCommonShare = 0.05;

}  // namespace detail

/// Runs the splitting for one configuration. In RSMA mode with
/// `warm_start_from_sdma`, an SDMA run is converged first and the RSMA run is
/// seeded from it; the SDMA point is kept when it scores a higher objective,
/// since it is feasible for RSMA as well. `sdma_out` receives the SDMA phase
/// when one was run.
inline Solution run(const SystemConfig& cfg, const ChannelSet& ch, const AngleGrid* grid_in = nullptr,
                    const std::optional<PrecoderMatrix>& init = std::nullopt, Solution* sdma_out = nullptr) {
  validate(cfg);
  if (ch.users() != cfg.users || ch.antennas() != cfg.antennas)
    throw std::invalid_argument("run: channel dimensions do not match the configuration");
  const AngleGrid grid = grid_in ? *grid_in : make_angle_grid(cfg);
  const detail::RunContext ctx{cfg,
                               ch,
                               grid,
                               QuantizationModel::from_config(cfg),
                               precoder_power_budget(cfg.p_total, cfg.antennas, cfg.bits, cfg.p_dac),
                               build_split_operators(cfg.users, cfg.antennas)};
  if (cfg.mode == AccessMode::kSdma || !cfg.warm_start_from_sdma || init)
    return detail::run_admm(ctx, cfg.mode, init);

  Solution sdma = detail::run_admm(ctx, AccessMode::kSdma, std::nullopt);
  if (sdma_out) *sdma_out = sdma;
  const PrecoderMatrix seed =
      detail::inject_common_stream(sdma.p, ch, ctx.budget.total, detail::kWarmStartCommonShare);
  Solution rsma = detail::run_admm(ctx, AccessMode::kRsma, seed);
  rsma.warm_started = true;
  rsma.warm_start_trace = sdma.trace;
  if (sdma.objective > rsma.objective) {
    Solution kept = std::move(sdma);
    kept.mode = AccessMode::kRsma;
    kept.warm_started = true;
    kept.kept_warm_start = true;
    kept.warm_start_trace = kept.trace;
    return kept;
  }
  return rsma;
}

}  // namespace rsmajrc
