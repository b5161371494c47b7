#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rsmajrc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AccessMode { kRsma, kSdma };

// Which closed form is used for the quantization noise variance.
//   kPaper: delta^2 (1 - delta^2)^2
//   kAqnm:  delta^2 (1 - delta^2)
enum class NoiseVarFormula { kPaper, kAqnm };

inline std::string to_string(AccessMode m) { return m == AccessMode::kRsma ? "rsma" : "sdma"; }
inline std::string to_string(NoiseVarFormula f) { return f == NoiseVarFormula::kPaper ? "paper" : "aqnm"; }

inline AccessMode parse_mode(const std::string& s) {
  if (s == "rsma" || s == "RSMA") return AccessMode::kRsma;
  if (s == "sdma" || s == "SDMA") return AccessMode::kSdma;
  throw ConfigError("unknown mode '" + s + "' (expected rsma or sdma)");
}

inline NoiseVarFormula parse_noise_formula(const std::string& s) {
  if (s == "paper") return NoiseVarFormula::kPaper;
  if (s == "aqnm") return NoiseVarFormula::kAqnm;
  throw ConfigError("unknown noise_var_formula '" + s + "' (expected paper or aqnm)");
}

/// Scenario, power, quantization and solver parameters for one design run.
/// Defaults reproduce the reference scenario: two users, four antennas at half
/// wavelength spacing, 1 W budget, 100 uW DAC coefficient and 10 uW noise.
struct SystemConfig {
  int users = 2;
  int antennas = 4;
  double spacing = 0.5;          // wavelengths
  double p_total = 1.0;          // W
  double p_dac = 100e-6;         // W
  double noise_power = 10e-6;    // W
  int bits = 4;
  double lambda = 1.0;
  double rho = 100.0;  // smaller values limit-cycle on the reference scenario
  double admm_tol = 1e-4;
  int admm_max_iter = 500;
  double wmmse_tol = 1e-10;
  int wmmse_max_iter = 20;  // inexact v-update, warm started from the previous iterate
  double sdr_tol = 1e-6;
  std::uint64_t seed = 1;
  double target_angle_deg = 0.0;
  double beamwidth_deg = 10.0;
  double grid_resolution_deg = 1.0;
  AccessMode mode = AccessMode::kRsma;
  NoiseVarFormula noise_var_formula = NoiseVarFormula::kPaper;
  bool warm_start_from_sdma = true;
  bool textbook_dual_residual = false;
  int randomization_samples = 0;  // 0 disables Gaussian randomization in SDR recovery
};

/// Throws ConfigError when the configuration cannot describe a valid scenario,
/// including a non-positive precoder budget P_total - N_t 2^b P_DAC.
inline void validate(const SystemConfig& c) {
  if (c.users < 1) throw ConfigError("invalid config: users must be >= 1");
  if (c.antennas < 1) throw ConfigError("invalid config: antennas must be >= 1");
  if (!(c.p_total > 0)) throw ConfigError("invalid config: p_total must be > 0");
  if (!(c.p_dac >= 0)) throw ConfigError("invalid config: p_dac_watts must be >= 0");
  if (!(c.noise_power > 0)) throw ConfigError("invalid config: noise_power must be > 0");
  if (c.bits < 1) throw ConfigError("invalid config: bits must be >= 1");
  if (c.bits > 52) throw ConfigError("invalid config: bits must be <= 52");
  if (!(c.lambda >= 0)) throw ConfigError("invalid config: lambda must be >= 0");
  if (!(c.rho >= 0)) throw ConfigError("invalid config: rho must be >= 0");
  if (!(c.admm_tol > 0) || !(c.wmmse_tol > 0) || !(c.sdr_tol > 0))
    throw ConfigError("invalid config: tolerances must be > 0");
  if (c.admm_max_iter < 1 || c.wmmse_max_iter < 1)
    throw ConfigError("invalid config: iteration caps must be >= 1");
  if (!(c.grid_resolution_deg > 0)) throw ConfigError("invalid config: grid_resolution_deg must be > 0");
  if (!(c.beamwidth_deg >= 0)) throw ConfigError("invalid config: beamwidth_deg must be >= 0");
  if (c.randomization_samples < 0) throw ConfigError("invalid config: randomization_samples must be >= 0");
  const double dac = std::ldexp(c.p_dac, c.bits);
  if (!(c.p_total - c.antennas * dac > 0))
    throw ConfigError("infeasible bit count: precoder budget P_total - N_t*2^b*P_DAC is non-positive for b=" +
                      std::to_string(c.bits));
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (is.fail() || !is.eof()) throw ConfigError("bad value for '" + key + "': '" + value + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

}  // namespace detail

/// Sets one field by key. Accepts snake_case keys plus the symbolic aliases
/// (K, N_t, d, P_total, P_dac_coeff, b).
inline void set_field(SystemConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "users" || key == "K") c.users = parse_number<int>(key, value);
  else if (key == "antennas" || key == "N_t") c.antennas = parse_number<int>(key, value);
  else if (key == "spacing" || key == "d") c.spacing = parse_number<double>(key, value);
  else if (key == "p_total" || key == "P_total") c.p_total = parse_number<double>(key, value);
  else if (key == "p_dac_watts" || key == "P_dac_coeff") c.p_dac = parse_number<double>(key, value);
  else if (key == "noise_power") c.noise_power = parse_number<double>(key, value);
  else if (key == "bits" || key == "b") c.bits = parse_number<int>(key, value);
  else if (key == "lambda") c.lambda = parse_number<double>(key, value);
  else if (key == "rho") c.rho = parse_number<double>(key, value);
  else if (key == "admm_tol") c.admm_tol = parse_number<double>(key, value);
  else if (key == "admm_max_iter") c.admm_max_iter = parse_number<int>(key, value);
  else if (key == "wmmse_tol") c.wmmse_tol = parse_number<double>(key, value);
  else if (key == "wmmse_max_iter") c.wmmse_max_iter = parse_number<int>(key, value);
  else if (key == "sdr_tol") c.sdr_tol = parse_number<double>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "target_angle_deg") c.target_angle_deg = parse_number<double>(key, value);
  else if (key == "beamwidth_deg") c.beamwidth_deg = parse_number<double>(key, value);
  else if (key == "grid_resolution_deg") c.grid_resolution_deg = parse_number<double>(key, value);
  else if (key == "mode") c.mode = parse_mode(value);
  else if (key == "noise_var_formula") c.noise_var_formula = parse_noise_formula(value);
  else if (key == "warm_start_from_sdma") c.warm_start_from_sdma = detail::parse_bool(key, value);
  else if (key == "textbook_dual_residual") c.textbook_dual_residual = detail::parse_bool(key, value);
  else if (key == "randomization_samples") c.randomization_samples = parse_number<int>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
inline SystemConfig parse_config(std::istream& in, SystemConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    set_field(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline SystemConfig load_config(const std::string& path, SystemConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, base);
}

/// Key/value echo used for output file headers.
inline std::map<std::string, std::string> describe(const SystemConfig& c) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {{"users", std::to_string(c.users)},
          {"antennas", std::to_string(c.antennas)},
          {"spacing", num(c.spacing)},
          {"p_total", num(c.p_total)},
          {"p_dac_watts", num(c.p_dac)},
          {"noise_power", num(c.noise_power)},
          {"bits", std::to_string(c.bits)},
          {"lambda", num(c.lambda)},
          {"rho", num(c.rho)},
          {"admm_tol", num(c.admm_tol)},
          {"admm_max_iter", std::to_string(c.admm_max_iter)},
          {"wmmse_tol", num(c.wmmse_tol)},
          {"wmmse_max_iter", std::to_string(c.wmmse_max_iter)},
          {"sdr_tol", num(c.sdr_tol)},
          {"seed", std::to_string(c.seed)},
          {"target_angle_deg", num(c.target_angle_deg)},
          {"beamwidth_deg", num(c.beamwidth_deg)},
          {"grid_resolution_deg", num(c.grid_resolution_deg)},
          {"mode", to_string(c.mode)},
          {"noise_var_formula", to_string(c.noise_var_formula)},
          {"warm_start_from_sdma", c.warm_start_from_sdma ? "true" : "false"},
          {"textbook_dual_residual", c.textbook_dual_residual ? "true" : "false"},
          {"randomization_samples", std::to_string(c.randomization_samples)}};
}

}  // namespace rsmajrc
