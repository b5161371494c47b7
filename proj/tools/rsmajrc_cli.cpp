#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsmajrc/experiments.hpp"

namespace {

using namespace rsmajrc;

struct CommonFlags {
  std::string config;
  std::vector<int> bits;
  std::vector<double> lambdas;
  std::string mode = "both";
  std::vector<std::uint64_t> seeds;
  std::string out = "results";
  int workers = 1;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--bits", f.bits, "DAC bit values");
  app->add_option("--lambda", f.lambdas, "radar weight values");
  app->add_option("--mode", f.mode, "access scheme")->check(CLI::IsMember({"rsma", "sdma", "both"}));
  app->add_option("--seed", f.seeds, "channel seeds (replicates)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--workers", f.workers, "concurrent sweep points")->check(CLI::PositiveNumber);
}

ExperimentSpec make_spec(const CommonFlags& f, std::vector<int> default_bits) {
  ExperimentSpec spec;
  if (!f.config.empty()) spec.base = load_config(f.config);
  spec.bits = f.bits.empty() ? std::move(default_bits) : f.bits;
  spec.lambdas = f.lambdas;
  if (f.mode == "rsma")
    spec.modes = {AccessMode::kRsma};
  else if (f.mode == "sdma")
    spec.modes = {AccessMode::kSdma};
  spec.seeds = f.seeds;
  spec.out_dir = f.out;
  spec.workers = f.workers;
  return spec;
}

int report(const SweepResult& res) {
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& r : res.records)
    std::cout << std::left << std::setw(5) << to_string(r.cfg.mode) << " b=" << std::setw(3) << r.cfg.bits
              << " lambda=" << std::setw(8) << format_label(r.cfg.lambda) << " seed=" << std::setw(4) << r.cfg.seed
              << " sum_rate=" << std::setw(12) << r.metrics.sum_rate << " nmse=" << std::setw(12) << r.metrics.nmse
              << " iters=" << r.solution.iterations << (r.solution.converged ? "" : " (max-iter)") << '\n';
  if (!res.csv.empty()) std::cout << "wrote " << res.csv.string() << '\n';
  for (const auto& e : res.failures) std::cerr << "failed: " << e << '\n';
  return res.failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RSMA/SDMA joint radar-communication precoder design with low-resolution DACs"};
  app.require_subcommand(1);

  CommonFlags conv_f, sweep_f, trade_f, single_f;
  auto* conv = app.add_subcommand("convergence", "ADMM residual traces per bit value at lambda = 1");
  add_common(conv, conv_f);
  auto* sweep = app.add_subcommand("bitsweep", "sum-rate and NMSE over b at lambda = 10");
  add_common(sweep, sweep_f);
  auto* trade = app.add_subcommand("tradeoff", "NMSE / sum-rate frontier over a lambda grid");
  add_common(trade, trade_f);
  auto* single = app.add_subcommand("single-run", "one configuration, trace and precoders written");
  add_common(single, single_f);

  std::vector<int> vq_bits{1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t vq_samples = 1000000;
  std::uint64_t vq_seed = 1;
  std::string vq_out = "results";
  std::string vq_formula = "paper";
  int vq_workers = 1;
  auto* vq = app.add_subcommand("validate-quantizer", "Monte-Carlo check of the linear quantizer model");
  vq->add_option("--bits", vq_bits, "bit values");
  vq->add_option("--samples", vq_samples, "samples per bit value");
  vq->add_option("--seed", vq_seed, "RNG seed");
  vq->add_option("--out", vq_out, "output directory");
  vq->add_option("--workers", vq_workers, "concurrent bit values")->check(CLI::PositiveNumber);
  vq->add_option("--noise-var-formula", vq_formula, "quantization noise formula")
      ->check(CLI::IsMember({"paper", "aqnm"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*conv) {
      ExperimentSpec spec = make_spec(conv_f, {4, 6, 8, 10});
      if (conv_f.mode == "both") spec.modes = {AccessMode::kRsma};
      return report(run_convergence(spec));
    }
    if (*sweep) return report(run_bit_sweep(make_spec(sweep_f, {4, 5, 6, 7, 8, 9, 10, 11})));
    if (*trade) return report(run_tradeoff_sweep(make_spec(trade_f, {4, 6, 8, 10})));
    if (*single) {
      ExperimentSpec spec = make_spec(single_f, {});
      if (spec.bits.empty()) spec.bits = {spec.base.bits};
      if (spec.lambdas.empty()) spec.lambdas = {spec.base.lambda};
      if (single_f.mode == "both") spec.modes = {spec.base.mode};
      return report(run_convergence(spec));
    }
    if (*vq) {
      const auto rows = run_quantizer_validation(vq_bits, vq_samples, vq_seed, vq_out, vq_workers,
                                                 parse_noise_formula(vq_formula));
      std::cout << "b  delta     gain      residual_var  model_var     correlation\n";
      for (const auto& r : rows)
        std::cout << std::left << std::setw(3) << r.bits << std::setw(10) << r.model_delta << std::setw(10)
                  << r.empirical_gain << std::setw(14) << r.empirical_residual_var << std::setw(14)
                  << r.model_noise_var << r.correlation << '\n';
      std::cout << "wrote " << (fs::path(vq_out) / "quantizer_validation.csv").string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
