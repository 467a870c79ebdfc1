#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebflow/datagen.hpp"
#include "ebflow/errors.hpp"

namespace ebflow::cli {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class Algorithm { ebflow, ebflow_precond, langevin_mcem, gibbs_mcem, cavi };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

// One experiment. Serialized as a flat JSON object whose keys are the field
// names below; unknown keys are rejected.
struct ExperimentConfig {
  std::string prior = "gaussian";
  double prior_bound = 3.0;
  int grid_size = 61;
  std::string design = "iid";
  std::int64_t n = 500;
  std::int64_t p = 1000;
  double noise_fraction = 0.5;
  std::int64_t n_new = 1000;

  std::string algorithm = "ebflow";
  std::string schedule = "loglinear";  // or "constant"
  double eta_phi = 1.0;                // constant step, log-linear start, Langevin-MCEM step
  double eta_phi_end = 0.1;
  double eta_w = 0.01;                 // constant schedule only
  double eta_ratio = 0.01;             // log-linear: eta_w = ratio * eta_phi
  std::int64_t decay_horizon = 10000;
  int burn_in = 200;
  double burn_in_eta_phi = 1.0;
  double lambda = 0.003;
  std::optional<double> tau_sq;        // null: sigma^2 / (2 lambda_max(XX^T))

  std::int64_t total_iters = 10000;    // including burn-in
  int t_iter = 100;
  std::int64_t subsample = 10000;
  std::int64_t post_iters = 50000;
  int thin = 1;
  int trace_every = 10;
  int autocorr_coords = 20;

  std::uint64_t data_seed = 1;         // generate, and experiment when resample_data is false
  bool resample_data = true;           // experiment: each seed draws its own dataset
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string out = "results";
  int threads = 1;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError on any out-of-range or inconsistent value.
  void validate() const;
  Algorithm algorithm_kind() const { return parse_algorithm(algorithm); }
  PriorSpec prior_spec() const;
  DesignSpec design_spec() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Applies "key=value" overrides. The value is parsed as JSON when possible
/// and taken as a plain string otherwise.
ExperimentConfig apply_overrides(const ExperimentConfig& config, const std::vector<std::string>& assignments);

}  // namespace ebflow::cli
