#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rsmajrc/admm.hpp"
#include "rsmajrc/config.hpp"
#include "rsmajrc/quantization.hpp"
#include "rsmajrc/scenario.hpp"

namespace rsmajrc {

namespace fs = std::filesystem;

struct ExperimentSpec {
  SystemConfig base;
  std::vector<int> bits;
  std::vector<double> lambdas;
  std::vector<AccessMode> modes{AccessMode::kRsma, AccessMode::kSdma};
  fs::path out_dir = "results";
  std::vector<std::uint64_t> seeds;  // empty: base.seed only
  int workers = 1;
  bool write_files = true;
};

inline std::vector<double> log_lambda_grid(double lo_exp = -2.0, double hi_exp = 2.0, int points = 9) {
  std::vector<double> out;
  for (int i = 0; i < points; ++i)
    out.push_back(std::pow(10.0, lo_exp + (hi_exp - lo_exp) * i / std::max(1, points - 1)));
  return out;
}

inline std::vector<std::uint64_t> seeds_of(const ExperimentSpec& spec) {
  return spec.seeds.empty() ? std::vector<std::uint64_t>{spec.base.seed} : spec.seeds;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// captured per index; the returned strings are empty on success.
inline std::vector<std::string> parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const int count = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

// ---- output helpers -------------------------------------------------------

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Short label for file names: 0.01 -> "0.01", 10 -> "10".
inline std::string format_label(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

/// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::ostringstream os;
  os << "iter,primal_residual,dual_residual,lagrangian,sum_rate,nmse\n";
  for (const auto& e : trace)
    os << e.iter << ',' << format_double(e.primal_residual) << ',' << format_double(e.dual_residual) << ','
       << format_double(e.lagrangian) << ',' << format_double(e.sum_rate) << ',' << format_double(e.nmse) << '\n';
  return os.str();
}

/// Header lines `# key value` echo the configuration, `# alpha` and `# c k`
/// carry the auxiliary variables, then one `stream antenna real imag` row per
/// precoder entry. Stream 0 is the common stream.
inline std::string precoder_text(const SystemConfig& cfg, const Solution& s) {
  std::ostringstream os;
  for (const auto& [k, v] : describe(cfg)) os << "# " << k << ' ' << v << '\n';
  os << "# alpha " << format_double(s.alpha) << '\n';
  for (Eigen::Index k = 0; k < s.c.size(); ++k) os << "# c " << k << ' ' << format_double(s.c(k)) << '\n';
  const CMat& m = s.p.matrix();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      os << j << ' ' << a << ' ' << format_double(m(a, j).real()) << ' ' << format_double(m(a, j).imag()) << '\n';
  return os.str();
}

struct StoredPrecoders {
  SystemConfig cfg;
  PrecoderMatrix p;
  RVec c;
  double alpha = 1.0;
};

inline StoredPrecoders parse_precoders(std::istream& in) {
  StoredPrecoders out;
  std::map<std::string, std::string> header;
  std::map<int, double> c;
  std::vector<std::tuple<int, int, double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "alpha") {
        ls >> out.alpha;
      } else if (key == "c") {
        int k = 0;
        double v = 0.0;
        ls >> k >> v;
        c[k] = v;
      } else {
        std::string value;
        ls >> value;
        header[key] = value;
      }
      continue;
    }
    int j = 0, a = 0;
    double re = 0.0, im = 0.0;
    if (!(ls >> j >> a >> re >> im)) throw std::runtime_error("malformed precoder row: " + line);
    rows.emplace_back(j, a, re, im);
  }
  for (const auto& [k, v] : header) set_field(out.cfg, k, v);
  out.p = PrecoderMatrix(out.cfg.antennas, out.cfg.users);
  for (const auto& [j, a, re, im] : rows) {
    if (j < 0 || j > out.cfg.users || a < 0 || a >= out.cfg.antennas)
      throw std::runtime_error("precoder row index out of range");
    out.p.matrix()(a, j) = cd(re, im);
  }
  out.c = RVec::Zero(out.cfg.users);
  for (const auto& [k, v] : c)
    if (k >= 0 && k < out.cfg.users) out.c(k) = v;
  return out;
}

inline StoredPrecoders load_precoders(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_precoders(in);
}

/// Regenerates the channels from the stored seed and recomputes the metrics.
inline Metrics regenerate_metrics(const StoredPrecoders& s) {
  const ChannelSet ch = generate_rayleigh_channels(s.cfg);
  const QuantizationModel q = QuantizationModel::from_config(s.cfg);
  const PowerBudget budget = precoder_power_budget(s.cfg.p_total, s.cfg.antennas, s.cfg.bits, s.cfg.p_dac);
  Solution sol;
  sol.p = s.p;
  sol.c = s.c;
  sol.alpha = s.alpha;
  sol.lambda = s.cfg.lambda;
  return evaluate(sol, ch, q, s.cfg.noise_power, make_angle_grid(s.cfg), budget.per_antenna);
}

// ---- sweep points -----------------------------------------------------------

struct RunRecord {
  SystemConfig cfg;
  Solution solution;
  Metrics metrics;
  double dac_power = 0.0;
  fs::path precoder_file;
  fs::path trace_file;
};

inline std::string run_tag(const SystemConfig& cfg) {
  return to_string(cfg.mode) + "_b" + std::to_string(cfg.bits) + "_lambda" + format_label(cfg.lambda) + "_seed" +
         std::to_string(cfg.seed);
}

inline RunRecord make_record(const SystemConfig& cfg, Solution sol, const ChannelSet& ch) {
  RunRecord rec;
  rec.cfg = cfg;
  const QuantizationModel q = QuantizationModel::from_config(cfg);
  const PowerBudget budget = precoder_power_budget(cfg.p_total, cfg.antennas, cfg.bits, cfg.p_dac);
  rec.metrics = evaluate(sol, ch, q, cfg.noise_power, make_angle_grid(cfg), budget.per_antenna);
  rec.dac_power = dac_power(cfg.bits, cfg.p_dac);
  rec.solution = std::move(sol);
  return rec;
}

inline void persist(RunRecord& rec, const fs::path& dir, bool with_trace) {
  rec.precoder_file = dir / "precoders" / (run_tag(rec.cfg) + ".txt");
  write_file_atomic(rec.precoder_file, precoder_text(rec.cfg, rec.solution));
  if (with_trace) {
    rec.trace_file = dir / ("trace_" + run_tag(rec.cfg) + ".csv");
    write_file_atomic(rec.trace_file, trace_csv(rec.solution.trace));
  }
}

/// Solves one (b, lambda, seed) point for the requested modes. RSMA with
/// SDMA warm start reuses its SDMA phase as the SDMA result.
inline std::vector<RunRecord> solve_point(SystemConfig cfg, const std::vector<AccessMode>& modes) {
  const ChannelSet ch = generate_rayleigh_channels(cfg);
  const bool want_rsma = std::find(modes.begin(), modes.end(), AccessMode::kRsma) != modes.end();
  const bool want_sdma = std::find(modes.begin(), modes.end(), AccessMode::kSdma) != modes.end();
  std::vector<RunRecord> out;
  if (want_rsma) {
    cfg.mode = AccessMode::kRsma;
    Solution sdma;
    Solution rsma = run(cfg, ch, nullptr, std::nullopt, &sdma);
    out.push_back(make_record(cfg, std::move(rsma), ch));
    if (want_sdma) {
      SystemConfig s = cfg;
      s.mode = AccessMode::kSdma;
      if (!cfg.warm_start_from_sdma) sdma = run(s, ch);
      out.push_back(make_record(s, std::move(sdma), ch));
    }
  } else if (want_sdma) {
    cfg.mode = AccessMode::kSdma;
    out.push_back(make_record(cfg, run(cfg, ch), ch));
  }
  return out;
}

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
  fs::path csv;
  fs::path summary;
};

namespace detail {

inline void require_nonempty(const ExperimentSpec& spec, bool bits, bool lambdas) {
  if (bits && spec.bits.empty()) throw std::invalid_argument("sweep: bit list is empty");
  if (lambdas && spec.lambdas.empty()) throw std::invalid_argument("sweep: lambda list is empty");
  if (spec.modes.empty()) throw std::invalid_argument("sweep: mode list is empty");
}

inline bool bit_feasible(const SystemConfig& base, int b) {
  if (b < 1) return false;
  return base.p_total - base.antennas * dac_power(b, base.p_dac) > 0;
}

struct Point {
  SystemConfig cfg;
};

inline SweepResult run_points(const std::vector<Point>& points, const ExperimentSpec& spec, bool with_trace) {
  std::vector<std::vector<RunRecord>> slots(points.size());
  const auto errors = parallel_for(points.size(), spec.workers, [&](std::size_t i) {
    slots[i] = solve_point(points[i].cfg, spec.modes);
    if (spec.write_files)
      for (auto& rec : slots[i]) persist(rec, spec.out_dir, with_trace);
  });
  SweepResult res;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) res.failures.push_back(run_tag(points[i].cfg) + ": " + errors[i]);
    for (auto& rec : slots[i]) res.records.push_back(std::move(rec));
  }
  return res;
}

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// One trace file per feasible bit value; infeasible values are skipped with a warning.
inline SweepResult run_convergence(const ExperimentSpec& spec) {
  detail::require_nonempty(spec, true, false);
  std::vector<detail::Point> points;
  SweepResult skipped;
  const double lambda = spec.lambdas.empty() ? 1.0 : spec.lambdas.front();
  for (std::uint64_t seed : seeds_of(spec))
    for (int b : spec.bits) {
      if (!detail::bit_feasible(spec.base, b)) {
        skipped.warnings.push_back("b=" + std::to_string(b) + " leaves no precoder power; skipped");
        continue;
      }
      SystemConfig cfg = spec.base;
      cfg.bits = b;
      cfg.lambda = lambda;
      cfg.seed = seed;
      points.push_back({cfg});
    }
  SweepResult res = detail::run_points(points, spec, true);
  res.warnings = std::move(skipped.warnings);
  std::ostringstream os;
  os << "mode,b,seed,iterations,converged,final_primal_residual,final_dual_residual,sum_rate,nmse,nmse_db,trace_file\n";
  for (const auto& r : res.records) {
    const auto& tr = r.solution.trace;
    os << to_string(r.cfg.mode) << ',' << r.cfg.bits << ',' << r.cfg.seed << ',' << r.solution.iterations << ','
       << (r.solution.converged ? 1 : 0) << ',' << format_double(tr.empty() ? 0.0 : tr.back().primal_residual) << ','
       << format_double(tr.empty() ? 0.0 : tr.back().dual_residual) << ',' << format_double(r.metrics.sum_rate) << ','
       << format_double(r.metrics.nmse) << ',' << format_double(r.metrics.nmse_db) << ','
       << r.trace_file.filename().string() << '\n';
  }
  if (spec.write_files) {
    res.csv = spec.out_dir / "convergence.csv";
    write_file_atomic(res.csv, os.str());
  }
  return res;
}

/// Rows (mode, b, seed, sum_rate, nmse, precoder_power, dac_power) over the
/// bit list, plus a per-(mode, b) mean/deviation summary across seeds.
inline SweepResult run_bit_sweep(const ExperimentSpec& spec) {
  detail::require_nonempty(spec, true, false);
  const double lambda = spec.lambdas.empty() ? 10.0 : spec.lambdas.front();
  std::vector<detail::Point> points;
  std::vector<std::string> warnings;
  for (std::uint64_t seed : seeds_of(spec))
    for (int b : spec.bits) {
      if (!detail::bit_feasible(spec.base, b)) {
        warnings.push_back("b=" + std::to_string(b) + " leaves no precoder power; skipped");
        continue;
      }
      SystemConfig cfg = spec.base;
      cfg.bits = b;
      cfg.lambda = lambda;
      cfg.seed = seed;
      points.push_back({cfg});
    }
  SweepResult res = detail::run_points(points, spec, false);
  res.warnings = std::move(warnings);

  std::ostringstream os;
  os << "mode,b,seed,lambda,sum_rate,nmse,nmse_db,precoder_power,dac_power,iterations,converged,precoder_file\n";
  for (const auto& r : res.records)
    os << to_string(r.cfg.mode) << ',' << r.cfg.bits << ',' << r.cfg.seed << ',' << format_label(r.cfg.lambda) << ','
       << format_double(r.metrics.sum_rate) << ',' << format_double(r.metrics.nmse) << ','
       << format_double(r.metrics.nmse_db) << ',' << format_double(r.metrics.precoder_power) << ',' << format_double(r.dac_power) << ','
       << r.solution.iterations << ',' << (r.solution.converged ? 1 : 0) << ','
       << r.precoder_file.filename().string() << '\n';

  std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : res.records) {
    auto& g = groups[{to_string(r.cfg.mode), r.cfg.bits}];
    g.first.push_back(r.metrics.sum_rate);
    g.second.push_back(r.metrics.nmse);
  }
  std::ostringstream table;
  table << std::left << std::setw(6) << "mode" << std::setw(4) << "b" << std::setw(24) << "sum_rate (mean+-sd)"
        << "nmse_dB (mean)\n";
  std::ostringstream summary_csv;
  summary_csv << "mode,b,seeds,sum_rate_mean,sum_rate_std,nmse_mean,nmse_std\n";
  for (const auto& [key, g] : groups) {
    summary_csv << key.first << ',' << key.second << ',' << g.first.size() << ','
                << format_double(detail::mean(g.first)) << ',' << format_double(detail::stddev(g.first)) << ','
                << format_double(detail::mean(g.second)) << ',' << format_double(detail::stddev(g.second)) << '\n';
    std::ostringstream rate;
    rate << std::fixed << std::setprecision(4) << detail::mean(g.first) << " +- " << detail::stddev(g.first);
    table << std::left << std::setw(6) << key.first << std::setw(4) << key.second << std::setw(24) << rate.str()
          << std::fixed << std::setprecision(3) << 10.0 * std::log10(detail::mean(g.second)) << '\n';
  }
  if (spec.write_files) {
    res.csv = spec.out_dir / "bitsweep.csv";
    write_file_atomic(res.csv, os.str());
    write_file_atomic(spec.out_dir / "bitsweep_summary.csv", summary_csv.str());
    res.summary = spec.out_dir / "bitsweep_summary.txt";
    write_file_atomic(res.summary, table.str());
  }
  return res;
}

/// For each (b, lambda, mode): the final (nmse, sum_rate) pair, one frontier file per b.
inline SweepResult run_tradeoff_sweep(const ExperimentSpec& spec) {
  detail::require_nonempty(spec, true, false);
  const std::vector<double> lambdas = spec.lambdas.empty() ? log_lambda_grid() : spec.lambdas;
  std::vector<detail::Point> points;
  std::vector<std::string> warnings;
  for (std::uint64_t seed : seeds_of(spec))
    for (int b : spec.bits) {
      if (!detail::bit_feasible(spec.base, b)) {
        warnings.push_back("b=" + std::to_string(b) + " leaves no precoder power; skipped");
        continue;
      }
      for (double lam : lambdas) {
        SystemConfig cfg = spec.base;
        cfg.bits = b;
        cfg.lambda = lam;
        cfg.seed = seed;
        points.push_back({cfg});
      }
    }
  SweepResult res = detail::run_points(points, spec, false);
  res.warnings = std::move(warnings);
  if (spec.write_files) {
    std::map<int, std::ostringstream> files;
    for (const auto& r : res.records) {
      auto& os = files[r.cfg.bits];
      if (os.tellp() == 0) os << "mode,lambda,seed,sum_rate,nmse,nmse_db,precoder_file\n";
      os << to_string(r.cfg.mode) << ',' << format_double(r.cfg.lambda) << ',' << r.cfg.seed << ','
         << format_double(r.metrics.sum_rate) << ',' << format_double(r.metrics.nmse) << ','
         << format_double(r.metrics.nmse_db) << ',' << r.precoder_file.filename().string() << '\n';
    }
    for (auto& [b, os] : files) write_file_atomic(spec.out_dir / ("tradeoff_b" + std::to_string(b) + ".csv"), os.str());
    res.csv = spec.out_dir;
  }
  return res;
}

// ---- quantizer validation ---------------------------------------------------

struct QuantizerCheck {
  int bits = 0;
  double model_delta = 0.0;
  double model_noise_var = 0.0;
  double empirical_gain = 0.0;
  double empirical_residual_var = 0.0;
  double correlation = 0.0;  // |E[e x*]| / sqrt(E|e|^2 E|x|^2)
};

/// Monte-Carlo comparison of the b-bit uniform quantizer against the linear
/// model on unit-variance circular Gaussian input. The least-squares gain is
/// estimated on one batch and the residual statistics on an independent one.
inline QuantizerCheck validate_quantizer(int bits, std::size_t samples, std::uint64_t seed,
                                         NoiseVarFormula formula = NoiseVarFormula::kPaper) {
  if (bits < 1) throw std::invalid_argument("validate_quantizer: bits must be >= 1");
  if (samples < 2) throw std::invalid_argument("validate_quantizer: need at least two samples");
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(bits));
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  const double step = default_quantizer_step(bits, 1.0);
  auto draw = [&] { return cd(n01(rng), n01(rng)); };
  auto quant = [&](cd x) { return cd(detail::midrise(x.real(), bits, step), detail::midrise(x.imag(), bits, step)); };

  cd yx(0.0, 0.0);
  double xx = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const cd x = draw();
    yx += quant(x) * std::conj(x);
    xx += std::norm(x);
  }
  const double gain = yx.real() / xx;

  cd ex(0.0, 0.0);
  double ee = 0.0;
  xx = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const cd x = draw();
    const cd e = quant(x) - gain * x;
    ex += e * std::conj(x);
    ee += std::norm(e);
    xx += std::norm(x);
  }
  QuantizerCheck out;
  out.bits = bits;
  out.model_delta = resolution_delta(bits);
  out.model_noise_var = quantization_noise_variance_for_bits(bits, formula);
  out.empirical_gain = gain;
  out.empirical_residual_var = ee / static_cast<double>(samples);
  out.correlation = std::abs(ex) / std::sqrt(ee * xx);
  return out;
}

inline std::vector<QuantizerCheck> run_quantizer_validation(const std::vector<int>& bits, std::size_t samples,
                                                            std::uint64_t seed, const fs::path& out_dir, int workers,
                                                            NoiseVarFormula formula = NoiseVarFormula::kPaper,
                                                            bool write_files = true) {
  if (bits.empty()) throw std::invalid_argument("run_quantizer_validation: bit list is empty");
  std::vector<QuantizerCheck> rows(bits.size());
  const auto errors = parallel_for(bits.size(), workers,
                                   [&](std::size_t i) { rows[i] = validate_quantizer(bits[i], samples, seed, formula); });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw std::runtime_error("quantizer validation b=" + std::to_string(bits[i]) + ": " + errors[i]);
  if (write_files) {
    std::ostringstream os;
    os << "b,model_delta,empirical_gain,gain_rel_error,model_noise_var,empirical_residual_var,correlation\n";
    for (const auto& r : rows)
      os << r.bits << ',' << format_double(r.model_delta) << ',' << format_double(r.empirical_gain) << ','
         << format_double(std::abs(r.empirical_gain - r.model_delta) / r.model_delta) << ','
         << format_double(r.model_noise_var) << ',' << format_double(r.empirical_residual_var) << ','
         << format_double(r.correlation) << '\n';
    write_file_atomic(out_dir / "quantizer_validation.csv", os.str());
  }
  return rows;
}

}  // namespace rsmajrc
