#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ebflow/cli/config.hpp"
#include "ebflow/cli/io.hpp"
#include "ebflow/ebflow.hpp"

namespace ebflow::cli {

/// Streams of `seed`: design, theta, noise and test design.
Dataset generate_dataset(const ExperimentConfig& config, std::uint64_t seed);
void cmd_generate(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out_dir);

/// Fits the configured algorithm from a uniform prior on the truth grid.
/// All chain randomness comes from stream 16 of `seed`.
FitResult run_fit(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed);

struct Metrics {
  double tv = 0.0;
  double w1 = 0.0;
  double kl = 0.0;                              // KL(truth || fit)
  std::optional<std::int64_t> iters_to_tv02;    // rounded to the nearest 100
  std::optional<double> mse;                    // needs theta_hat
  std::optional<double> identity_nll;           // X = I only
};

/// First recorded iteration with TV < threshold, rounded to the nearest 100;
/// empty when the last recorded TV is not below the threshold.
std::optional<std::int64_t> iterations_to_tv(const std::vector<TraceRecord>& trace, double threshold = 0.2);

Metrics compute_metrics(const GridPrior& fitted, const std::vector<TraceRecord>& trace,
                        const std::optional<VectorXd>& theta_hat, const Dataset& data);
nlohmann::json metrics_json(const Metrics& m);
std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);

/// trace.csv, final_weights.csv, theta_hat.csv (when present), metrics.json, run_meta.json.
void write_result(const fs::path& dir, const ExperimentConfig& config, std::uint64_t seed,
                  const FitResult& result, const Metrics& metrics, double wall_seconds);

void cmd_fit(const ExperimentConfig& config, const fs::path& dataset_dir, std::uint64_t seed,
             const fs::path& out_dir);
Metrics cmd_evaluate(const fs::path& result_dir, const fs::path& dataset_dir);

struct RunOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
  double wall_seconds = 0.0;
};

struct ExperimentSummary {
  std::vector<RunOutcome> runs;  // in seed order
  int failed = 0;
  double tv_mean = 0.0;
  double tv_sd = 0.0;
  std::optional<std::int64_t> median_iters_to_tv02;
  std::optional<double> mse_mean;
  std::optional<double> mse_sd;
  std::optional<double> nll_mean;
  std::optional<double> nll_sd;
};

/// Median with missing values treated as +infinity; empty if the median is missing.
std::optional<std::int64_t> median_with_missing(std::vector<std::optional<std::int64_t>> values);

ExperimentSummary summarize(std::vector<RunOutcome> runs);

/// Fits every seed on a worker pool of `threads`. With resample_data each
/// seed simulates its own dataset (seed_<s>/data); otherwise all seeds share
/// one dataset from data_seed (data/). Writes seed_<s>/, runs.csv and
/// summary.csv under `out`.
ExperimentSummary cmd_experiment(const ExperimentConfig& config);

}  // namespace ebflow::cli
