#include "ebflow/cli/config.hpp"

#include <fstream>
#include <set>

namespace ebflow::cli {

using nlohmann::json;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ebflow: return "ebflow";
    case Algorithm::ebflow_precond: return "ebflow-precond";
    case Algorithm::langevin_mcem: return "langevin-mcem";
    case Algorithm::gibbs_mcem: return "gibbs-mcem";
    case Algorithm::cavi: return "cavi";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "ebflow") return Algorithm::ebflow;
  if (name == "ebflow-precond") return Algorithm::ebflow_precond;
  if (name == "langevin-mcem") return Algorithm::langevin_mcem;
  if (name == "gibbs-mcem") return Algorithm::gibbs_mcem;
  if (name == "cavi") return Algorithm::cavi;
  throw ConfigError("unknown algorithm '" + name + "'");
}

PriorSpec ExperimentConfig::prior_spec() const {
  PriorSpec s;
  s.kind = parse_prior_kind(prior);
  s.bound = prior_bound;
  s.grid_size = grid_size;
  return s;
}

DesignSpec ExperimentConfig::design_spec() const {
  DesignSpec s;
  s.kind = parse_design_kind(design);
  s.n = n;
  s.p = p;
  return s;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  try {
    const auto pk = parse_prior_kind(prior);
    require(pk != PriorKind::custom, "custom priors are not available from a config file");
    const auto dk = parse_design_kind(design);
    require(dk != DesignKind::custom, "custom designs are not available from a config file");
    if (dk == DesignKind::identity) require(n == p, "identity design needs n = p");
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  parse_algorithm(algorithm);
  require(schedule == "loglinear" || schedule == "constant", "schedule must be 'loglinear' or 'constant'");
  require(prior_bound > 0.0, "prior_bound must be positive");
  require(grid_size >= 2, "grid_size must be >= 2");
  require(n >= 2 && p >= 1, "n must be >= 2 and p >= 1");
  require(noise_fraction > 0.0 && noise_fraction < 1.0, "noise_fraction must lie in (0, 1)");
  require(n_new >= 1, "n_new must be >= 1");
  require(eta_phi > 0.0 && eta_phi_end > 0.0 && burn_in_eta_phi > 0.0, "step sizes must be positive");
  require(eta_w > 0.0 && eta_w <= 1.0, "eta_w must lie in (0, 1]");
  require(eta_ratio > 0.0 && eta_ratio * std::max(eta_phi, eta_phi_end) <= 1.0,
          "eta_ratio must be positive with eta_ratio * eta_phi <= 1");
  require(decay_horizon >= 1, "decay_horizon must be >= 1");
  require(burn_in >= 0, "burn_in must be >= 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(!tau_sq || *tau_sq > 0.0, "tau_sq must be positive or null");
  require(total_iters >= 0, "total_iters must be >= 0");
  require(t_iter >= 1, "t_iter must be >= 1");
  require(subsample >= 1, "subsample must be >= 1");
  require(post_iters >= 0, "post_iters must be >= 0");
  require(thin >= 1, "thin must be >= 1");
  require(trace_every >= 1, "trace_every must be >= 1");
  require(autocorr_coords >= 0, "autocorr_coords must be >= 0");
  require(!seeds.empty(), "seeds must not be empty");
  require(threads >= 1, "threads must be >= 1");
  require(!out.empty(), "out must not be empty");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["prior"] = c.prior;
  j["prior_bound"] = c.prior_bound;
  j["grid_size"] = c.grid_size;
  j["design"] = c.design;
  j["n"] = c.n;
  j["p"] = c.p;
  j["noise_fraction"] = c.noise_fraction;
  j["n_new"] = c.n_new;
  j["algorithm"] = c.algorithm;
  j["schedule"] = c.schedule;
  j["eta_phi"] = c.eta_phi;
  j["eta_phi_end"] = c.eta_phi_end;
  j["eta_w"] = c.eta_w;
  j["eta_ratio"] = c.eta_ratio;
  j["decay_horizon"] = c.decay_horizon;
  j["burn_in"] = c.burn_in;
  j["burn_in_eta_phi"] = c.burn_in_eta_phi;
  j["lambda"] = c.lambda;
  j["tau_sq"] = c.tau_sq ? json(*c.tau_sq) : json(nullptr);
  j["total_iters"] = c.total_iters;
  j["t_iter"] = c.t_iter;
  j["subsample"] = c.subsample;
  j["post_iters"] = c.post_iters;
  j["thin"] = c.thin;
  j["trace_every"] = c.trace_every;
  j["autocorr_coords"] = c.autocorr_coords;
  j["data_seed"] = c.data_seed;
  j["resample_data"] = c.resample_data;
  j["seeds"] = c.seeds;
  j["out"] = c.out;
  j["threads"] = c.threads;
  return j;
}

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned()) throw ConfigError("");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("");
    }
    field = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(std::string("config: key '") + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  const ExperimentConfig defaults;
  const json known = to_json(defaults);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  read_key(j, "prior", c.prior);
  read_key(j, "prior_bound", c.prior_bound);
  read_key(j, "grid_size", c.grid_size);
  read_key(j, "design", c.design);
  read_key(j, "n", c.n);
  read_key(j, "p", c.p);
  read_key(j, "noise_fraction", c.noise_fraction);
  read_key(j, "n_new", c.n_new);
  read_key(j, "algorithm", c.algorithm);
  read_key(j, "schedule", c.schedule);
  read_key(j, "eta_phi", c.eta_phi);
  read_key(j, "eta_phi_end", c.eta_phi_end);
  read_key(j, "eta_w", c.eta_w);
  read_key(j, "eta_ratio", c.eta_ratio);
  read_key(j, "decay_horizon", c.decay_horizon);
  read_key(j, "burn_in", c.burn_in);
  read_key(j, "burn_in_eta_phi", c.burn_in_eta_phi);
  read_key(j, "lambda", c.lambda);
  if (auto it = j.find("tau_sq"); it != j.end()) {
    if (it->is_null()) {
      c.tau_sq.reset();
    } else if (it->is_number()) {
      c.tau_sq = it->get<double>();
    } else {
      throw ConfigError("config: key 'tau_sq' must be a number or null");
    }
  }
  read_key(j, "total_iters", c.total_iters);
  read_key(j, "t_iter", c.t_iter);
  read_key(j, "subsample", c.subsample);
  read_key(j, "post_iters", c.post_iters);
  read_key(j, "thin", c.thin);
  read_key(j, "trace_every", c.trace_every);
  read_key(j, "autocorr_coords", c.autocorr_coords);
  read_key(j, "data_seed", c.data_seed);
  read_key(j, "resample_data", c.resample_data);
  if (auto it = j.find("seeds"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("config: 'seeds' must be a list of non-negative integers");
    c.seeds.clear();
    for (const auto& s : *it) {
      if (!s.is_number_unsigned()) throw ConfigError("config: 'seeds' must be a list of non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  read_key(j, "out", c.out);
  read_key(j, "threads", c.threads);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << to_json(config).dump(2) << '\n';
}

ExperimentConfig apply_overrides(const ExperimentConfig& config, const std::vector<std::string>& assignments) {
  json j = to_json(config);
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not key=value");
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    if (!j.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    j[key] = value;
  }
  return config_from_json(j);
}

}  // namespace ebflow::cli
