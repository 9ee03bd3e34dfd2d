#ifndef LPV_SMPC_EXPERIMENT_CONFIG_HPP
#define LPV_SMPC_EXPERIMENT_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lpv_smpc/io/csv.hpp"
#include "lpv_smpc/rng.hpp"

namespace lpv_smpc::experiment {

/**
 * Flat dotted key-value configuration. One `key = value` per line, `#` starts a comment.
 * Lists are comma separated; a list of vectors (run.x0) separates vectors with `;`.
 * Every key has a per-plant default, so a file only needs `plant` plus its overrides.
 */
struct ExperimentConfig {
  std::string plant = "double_integrator";
  std::uint64_t seed = 1;

  int data_samples = 500;
  int data_train = 400;

  std::string architecture = "affine";
  int pretrain_epochs = 1000;
  double pretrain_lr = 0.01;
  int epochs = 1000;
  double lr = 0.01;
  int train_n_mc = 5;
  double sigma_init = 0.02;

  int posterior_samples = 500;
  double delta = 0.05;
  double band = 2.0;

  int trajectories = 500;  // L
  int scenario_steps = 1;  // K
  int scenario_n_mc = 500;
  int clusters = 3;
  double beta_m = 1.0;

  int N = 10;
  int N_b = 1;
  Vec Q = Vec::Ones(2);  // diagonal
  Vec R = Vec::Ones(1);
  bool regenerate = true;

  bool terminal_cost = true;
  bool terminal_set = true;
  bool compute_doa = true;
  bool explicit_law = false;
  int transform_epochs = 5000;
  int verify_probes = 1000;

  std::vector<Vec> x0;
  std::string scheduling = "iid_uniform";
  int steps = 50;
  int run_seeds = 20;
  std::uint64_t first_run_seed = 1;
  int envelope_models = 500;

  void validate() const;
};

/// Defaults of a benchmark.
inline ExperimentConfig default_config(const std::string& plant) {
  ExperimentConfig c;
  c.plant = plant;
  if (plant == "double_integrator") {
    c.x0 = {(Vec(2) << 2.7, -1.8).finished(), (Vec(2) << 6, 6).finished(), (Vec(2) << -6, 6).finished(),
            (Vec(2) << 6, -6).finished(), (Vec(2) << -6, -6).finished()};
    return c;
  }
  if (plant == "mimo_nonlinear") {
    c.data_samples = 1100;
    c.data_train = 800;
    c.architecture = "deep_elu";
    c.pretrain_epochs = c.epochs = 10000;
    c.pretrain_lr = c.lr = 0.001;
    c.trajectories = 100;
    c.beta_m = 2.0;
    c.R = Vec::Ones(2);
    c.x0 = {(Vec(2) << 6, 6).finished(), (Vec(2) << -6, 6).finished(), (Vec(2) << 6, -6).finished(),
            (Vec(2) << -6, -6).finished()};
    return c;
  }
  throw ValidationError("config: unknown plant '" + plant + "' (expected double_integrator or mimo_nonlinear)");
}

inline void ExperimentConfig::validate() const {
  const int nx = 2, nu = plant == "double_integrator" ? 1 : 2;
  require(plant == "double_integrator" || plant == "mimo_nonlinear", "config: unknown plant '" + plant + "'");
  require(data_samples >= 10, "config: data.samples must be at least 10");
  require(data_train >= 2 && data_train <= data_samples - 2, "config: data.train must leave at least two test records");
  require(architecture == "affine" || architecture == "deep_elu", "config: bnn.architecture must be affine or deep_elu");
  require(pretrain_epochs >= 0 && epochs >= 1, "config: epoch counts out of range");
  require(pretrain_lr > 0.0 && lr > 0.0, "config: learning rates must be positive");
  require(train_n_mc >= 1 && sigma_init > 0.0, "config: bnn.n_mc and bnn.sigma_init must be positive");
  require(posterior_samples >= 2, "config: validate.posterior_samples must be at least 2");
  require(delta > 0.0 && delta < 1.0, "config: validate.delta must lie in (0, 1)");
  require(band > 0.0, "config: validate.band must be positive");
  require(trajectories >= 1 && scenario_n_mc >= 2, "config: scenario.trajectories and scenario.n_mc out of range");
  require(scenario_steps == 1, "config: scenario.steps must be 1 (i.i.d. scheduling makes every stage identically distributed)");
  require(clusters >= 1 && beta_m > 0.0, "config: scenario.clusters and scenario.beta_m must be positive");
  require(N >= 1 && N_b >= 0 && N_b <= N, "config: need mpc.N >= 1 and 0 <= mpc.N_b <= mpc.N");
  require(Q.size() == nx && (Q.array() > 0.0).all(), "config: mpc.Q needs " + std::to_string(nx) + " positive diagonal entries");
  require(R.size() == nu && (R.array() > 0.0).all(), "config: mpc.R needs " + std::to_string(nu) + " positive diagonal entries");
  require(transform_epochs >= 1 && verify_probes >= 1, "config: terminal.transform_epochs and terminal.verify_probes must be positive");
  require(!explicit_law || (terminal_set && terminal_cost), "config: terminal.explicit_law needs the terminal ingredients");
  require(!x0.empty(), "config: run.x0 is empty");
  for (const auto& x : x0) require(x.size() == nx, "config: every run.x0 entry needs " + std::to_string(nx) + " values");
  require(scheduling == "iid_uniform", "config: run.scheduling must be iid_uniform");
  require(steps >= 1 && run_seeds >= 1, "config: run.steps and run.seeds must be positive");
  require(envelope_models >= 1, "config: run.envelope_models must be positive");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: " + key + " expects a number, got '" + v + "'");
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: " + key + " expects an integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError("config: " + key + " expects true or false, got '" + v + "'");
}

inline Vec to_vec(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  Vec out(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) out(static_cast<Eigen::Index>(i)) = to_double(key, parts[i]);
  return out;
}

inline std::string vec_text(const Vec& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_double(v(i));
  return s;
}

inline int to_int32(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  require(i >= -2147483647LL && i <= 2147483647LL, "config: " + key + " out of range");
  return static_cast<int>(i);
}

inline std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  require(i >= 0, "config: " + key + " must be non-negative");
  return static_cast<std::uint64_t>(i);
}

}  // namespace detail

/// Key -> canonical value text for every field, sorted by key.
inline std::map<std::string, std::string> config_entries(const ExperimentConfig& c) {
  using detail::vec_text;
  auto num = [](double d) { return io::format_double(d); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  std::string x0;
  for (std::size_t i = 0; i < c.x0.size(); ++i) x0 += (i ? "; " : "") + vec_text(c.x0[i]);
  return {{"plant", c.plant},
          {"seed", std::to_string(c.seed)},
          {"data.samples", std::to_string(c.data_samples)},
          {"data.train", std::to_string(c.data_train)},
          {"bnn.architecture", c.architecture},
          {"bnn.pretrain_epochs", std::to_string(c.pretrain_epochs)},
          {"bnn.pretrain_lr", num(c.pretrain_lr)},
          {"bnn.epochs", std::to_string(c.epochs)},
          {"bnn.lr", num(c.lr)},
          {"bnn.n_mc", std::to_string(c.train_n_mc)},
          {"bnn.sigma_init", num(c.sigma_init)},
          {"validate.posterior_samples", std::to_string(c.posterior_samples)},
          {"validate.delta", num(c.delta)},
          {"validate.band", num(c.band)},
          {"scenario.trajectories", std::to_string(c.trajectories)},
          {"scenario.steps", std::to_string(c.scenario_steps)},
          {"scenario.n_mc", std::to_string(c.scenario_n_mc)},
          {"scenario.clusters", std::to_string(c.clusters)},
          {"scenario.beta_m", num(c.beta_m)},
          {"mpc.N", std::to_string(c.N)},
          {"mpc.N_b", std::to_string(c.N_b)},
          {"mpc.Q", vec_text(c.Q)},
          {"mpc.R", vec_text(c.R)},
          {"mpc.regenerate", flag(c.regenerate)},
          {"terminal.cost", flag(c.terminal_cost)},
          {"terminal.set", flag(c.terminal_set)},
          {"terminal.doa", flag(c.compute_doa)},
          {"terminal.explicit_law", flag(c.explicit_law)},
          {"terminal.transform_epochs", std::to_string(c.transform_epochs)},
          {"terminal.verify_probes", std::to_string(c.verify_probes)},
          {"run.x0", x0},
          {"run.scheduling", c.scheduling},
          {"run.steps", std::to_string(c.steps)},
          {"run.seeds", std::to_string(c.run_seeds)},
          {"run.first_seed", std::to_string(c.first_run_seed)},
          {"run.envelope_models", std::to_string(c.envelope_models)}};
}

inline void set_entry(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "seed") c.seed = to_seed(key, v);
  else if (key == "data.samples") c.data_samples = to_int32(key, v);
  else if (key == "data.train") c.data_train = to_int32(key, v);
  else if (key == "bnn.architecture") c.architecture = v;
  else if (key == "bnn.pretrain_epochs") c.pretrain_epochs = to_int32(key, v);
  else if (key == "bnn.pretrain_lr") c.pretrain_lr = to_double(key, v);
  else if (key == "bnn.epochs") c.epochs = to_int32(key, v);
  else if (key == "bnn.lr") c.lr = to_double(key, v);
  else if (key == "bnn.n_mc") c.train_n_mc = to_int32(key, v);
  else if (key == "bnn.sigma_init") c.sigma_init = to_double(key, v);
  else if (key == "validate.posterior_samples") c.posterior_samples = to_int32(key, v);
  else if (key == "validate.delta") c.delta = to_double(key, v);
  else if (key == "validate.band") c.band = to_double(key, v);
  else if (key == "scenario.trajectories") c.trajectories = to_int32(key, v);
  else if (key == "scenario.steps") c.scenario_steps = to_int32(key, v);
  else if (key == "scenario.n_mc") c.scenario_n_mc = to_int32(key, v);
  else if (key == "scenario.clusters") c.clusters = to_int32(key, v);
  else if (key == "scenario.beta_m") c.beta_m = to_double(key, v);
  else if (key == "mpc.N") c.N = to_int32(key, v);
  else if (key == "mpc.N_b") c.N_b = to_int32(key, v);
  else if (key == "mpc.Q") c.Q = to_vec(key, v);
  else if (key == "mpc.R") c.R = to_vec(key, v);
  else if (key == "mpc.regenerate") c.regenerate = to_bool(key, v);
  else if (key == "terminal.cost") c.terminal_cost = to_bool(key, v);
  else if (key == "terminal.set") c.terminal_set = to_bool(key, v);
  else if (key == "terminal.doa") c.compute_doa = to_bool(key, v);
  else if (key == "terminal.explicit_law") c.explicit_law = to_bool(key, v);
  else if (key == "terminal.transform_epochs") c.transform_epochs = to_int32(key, v);
  else if (key == "terminal.verify_probes") c.verify_probes = to_int32(key, v);
  else if (key == "run.x0") {
    c.x0.clear();
    for (const auto& part : split(v, ';')) c.x0.push_back(to_vec(key, part));
  } else if (key == "run.scheduling") c.scheduling = v;
  else if (key == "run.steps") c.steps = to_int32(key, v);
  else if (key == "run.seeds") c.run_seeds = to_int32(key, v);
  else if (key == "run.first_seed") c.first_run_seed = to_seed(key, v);
  else if (key == "run.envelope_models") c.envelope_models = to_int32(key, v);
  else throw ValidationError("config: unknown key '" + key + "'");
}

/// Parse config text; `plant` selects the defaults the remaining keys override. Validates the result.
inline ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::string plant;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    require(!key.empty() && !value.empty(), "config line " + std::to_string(lineno) + ": empty key or value");
    for (const auto& [k, _] : kv) require(k != key, "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    if (key == "plant") plant = value;
    kv.emplace_back(key, value);
  }
  require(!plant.empty(), "config: missing required key 'plant'");
  ExperimentConfig c = default_config(plant);
  for (const auto& [k, v] : kv)
    if (k != "plant") set_entry(c, k, v);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(io::read_text(path)); }

/// Canonical text: every key in sorted order, so equal configurations print identically.
inline std::string canonical_text(const ExperimentConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
  return s;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string content_hash(const std::string& bytes) { return hex64(lpv_smpc::detail::fnv1a(bytes)); }

inline std::string config_hash(const ExperimentConfig& c) { return content_hash(canonical_text(c)); }

}  // namespace lpv_smpc::experiment

#endif  // LPV_SMPC_EXPERIMENT_CONFIG_HPP
