#include "ebflow/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "ebflow/baselines.hpp"
#include "ebflow/datagen.hpp"
#include "ebflow/inference.hpp"
#include "ebflow/rng.hpp"

#ifndef EBFLOW_BUILD_ID
#define EBFLOW_BUILD_ID "unknown"
#endif

namespace ebflow::cli {

using nlohmann::json;

Dataset generate_dataset(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const GridPrior truth = make_prior(config.prior_spec());
  const DesignSpec design = config.design_spec();
  Rng design_rng(seed, streams::kDesign);
  Rng theta_rng(seed, streams::kTheta);
  Rng noise_rng(seed, streams::kNoise);
  Rng test_rng(seed, streams::kTestDesign);
  const MatrixXd X = make_design(design, design_rng);
  LinearModel model = simulate(truth, X, config.noise_fraction, theta_rng, noise_rng);
  MatrixXd X_new;
  if (design.kind == DesignKind::identity) {
    X_new = MatrixXd::Identity(config.p, config.p);
  } else {
    DesignSpec test = design;
    test.n = config.n_new;
    X_new = make_design(test, test_rng);
  }
  json meta;
  meta["prior"] = config.prior;
  meta["prior_bound"] = config.prior_bound;
  meta["grid_size"] = config.grid_size;
  meta["design"] = config.design;
  meta["n"] = config.n;
  meta["p"] = config.p;
  meta["noise_fraction"] = config.noise_fraction;
  meta["seed"] = seed;
  meta["rng"] = Rng::kName;
  meta["rng_version"] = Rng::kVersion;
  return Dataset{std::move(model), std::move(X_new), truth, std::move(meta)};
}

void cmd_generate(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  write_dataset(out_dir, generate_dataset(config, seed));
}

FitResult run_fit(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed) {
  config.validate();
  const GridPrior init = GridPrior::uniform(data.truth.support());
  const SplinePenalty penalty(config.lambda, init.size(), init.spacing());
  Rng rng(seed, streams::kFit);
  const Algorithm algo = config.algorithm_kind();
  switch (algo) {
    case Algorithm::ebflow:
    case Algorithm::ebflow_precond: {
      const bool precond = algo == Algorithm::ebflow_precond;
      const ReparamContext ctx = build_reparam(data.model, config.tau_sq, precond);
      EbflowOptions opts;
      if (config.schedule == "constant") {
        opts.schedule = StepSchedule::constant(config.eta_phi, config.eta_w, config.burn_in);
      } else {
        opts.schedule = StepSchedule::loglinear(config.eta_phi, config.eta_phi_end,
                                                static_cast<int>(config.decay_horizon), config.eta_ratio,
                                                config.burn_in);
      }
      opts.schedule.burn_in_eta_phi = config.burn_in_eta_phi;
      opts.penalty = penalty;
      opts.total_iters = config.total_iters;
      opts.precond = precond;
      opts.trace_every = config.trace_every;
      opts.post_iters = config.post_iters;
      opts.thin = config.thin;
      opts.autocorr_coords = config.autocorr_coords;
      return fit_ebflow(ctx, init, opts, std::move(rng), &data.truth);
    }
    case Algorithm::langevin_mcem: {
      const ReparamContext ctx = build_reparam(data.model, config.tau_sq, false);
      LangevinMcemOptions opts;
      opts.eta_phi = config.eta_phi;
      opts.t_iter = config.t_iter;
      opts.total_iters = config.total_iters;
      opts.burn_in = config.burn_in;
      opts.burn_in_eta_phi = config.burn_in_eta_phi;
      opts.subsample = config.subsample;
      opts.penalty = penalty;
      opts.trace_every = config.trace_every;
      opts.post_iters = config.post_iters;
      opts.thin = config.thin;
      opts.autocorr_coords = config.autocorr_coords;
      return fit_langevin_mcem(ctx, init, opts, std::move(rng), &data.truth);
    }
    case Algorithm::gibbs_mcem: {
      GibbsMcemOptions opts;
      opts.t_iter = config.t_iter;
      opts.total_iters = config.total_iters;
      opts.burn_in = config.burn_in;
      opts.penalty = penalty;
      opts.trace_every = config.trace_every;
      opts.post_iters = config.post_iters;
      return fit_gibbs_mcem(data.model, init, opts, std::move(rng), &data.truth);
    }
    case Algorithm::cavi: {
      CaviOptions opts;
      opts.iterations = config.total_iters;
      opts.penalty = penalty;
      opts.trace_every = config.trace_every;
      return fit_cavi(data.model, init, opts, &data.truth);
    }
  }
  throw ConfigError("unknown algorithm");
}

std::optional<std::int64_t> iterations_to_tv(const std::vector<TraceRecord>& trace, double threshold) {
  const TraceRecord* last = nullptr;
  const TraceRecord* first_below = nullptr;
  for (const auto& r : trace) {
    if (std::isnan(r.tv)) continue;
    last = &r;
    if (first_below == nullptr && r.tv < threshold) first_below = &r;
  }
  if (last == nullptr || !(last->tv < threshold) || first_below == nullptr) return std::nullopt;
  return static_cast<std::int64_t>(std::llround(static_cast<double>(first_below->iter) / 100.0)) * 100;
}

Metrics compute_metrics(const GridPrior& fitted, const std::vector<TraceRecord>& trace,
                        const std::optional<VectorXd>& theta_hat, const Dataset& data) {
  Metrics m;
  m.tv = tv_distance(fitted, data.truth);
  m.w1 = grid_w1(fitted, data.truth);
  m.kl = kl(data.truth, fitted);
  m.iters_to_tv02 = iterations_to_tv(trace, 0.2);
  if (theta_hat && data.model.theta_star) m.mse = prediction_mse(*theta_hat, *data.model.theta_star, data.X_new);
  if (data.model.n() == data.model.p() && data.model.X.isIdentity(0.0))
    m.identity_nll = identity_marginal_nll(data.model, fitted);
  return m;
}

namespace {

json optional_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }
std::string optional_csv(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : "NA"; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json metrics_json(const Metrics& m) {
  json j;
  j["tv"] = m.tv;
  j["w1"] = m.w1;
  j["kl_truth_fit"] = finite_or_null(m.kl);
  j["iters_to_tv02"] = m.iters_to_tv02 ? json(*m.iters_to_tv02) : json(nullptr);
  j["mse"] = optional_json(m.mse);
  j["identity_nll"] = optional_json(m.identity_nll);
  return j;
}

std::string metrics_csv_header() { return "tv,w1,kl_truth_fit,iters_to_tv02,mse,identity_nll"; }

std::string metrics_csv_row(const Metrics& m) {
  return format_double(m.tv) + ',' + format_double(m.w1) + ',' +
         (std::isfinite(m.kl) ? format_double(m.kl) : std::string("NA")) + ',' + optional_csv(m.iters_to_tv02) +
         ',' + optional_csv(m.mse) + ',' + optional_csv(m.identity_nll);
}

void write_result(const fs::path& dir, const ExperimentConfig& config, std::uint64_t seed, const FitResult& result,
                  const Metrics& metrics, double wall_seconds) {
  fs::create_directories(dir);
  write_trace_csv(dir / "trace.csv", result.trace);
  write_weights_csv(dir / "final_weights.csv", result.prior);
  if (result.theta_hat) write_vector_csv(dir / "theta_hat.csv", *result.theta_hat);
  json m = metrics_json(metrics);
  m["posterior_samples"] = result.posterior_samples;
  m["autocorr_lag1"] = finite_or_null(result.autocorr_lag1);
  m["autocorr_lag10"] = finite_or_null(result.autocorr_lag10);
  m["total_clamps"] = result.total_clamps;
  write_json(dir / "metrics.json", m);
  json meta;
  meta["seed"] = seed;
  meta["algorithm"] = result.algorithm;
  meta["build"] = EBFLOW_BUILD_ID;
  meta["wall_seconds"] = wall_seconds;
  meta["rng"] = Rng::kName;
  meta["rng_version"] = Rng::kVersion;
  meta["rng_stream"] = streams::kFit;
  meta["warnings"] = result.warnings;
  meta["config"] = to_json(config);
  write_json(dir / "run_meta.json", meta);
}

void cmd_fit(const ExperimentConfig& config, const fs::path& dataset_dir, std::uint64_t seed,
             const fs::path& out_dir) {
  const Dataset data = read_dataset(dataset_dir);
  if (data.truth.size() != config.grid_size)
    throw ConfigError("config grid_size does not match the dataset's truth grid");
  const auto start = std::chrono::steady_clock::now();
  const FitResult result = run_fit(config, data, seed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_result(out_dir, config, seed, result, compute_metrics(result.prior, result.trace, result.theta_hat, data),
               wall);
}

Metrics cmd_evaluate(const fs::path& result_dir, const fs::path& dataset_dir) {
  const Dataset data = read_dataset(dataset_dir);
  const GridPrior fitted = read_weights_csv(result_dir / "final_weights.csv");
  const auto trace = read_trace_csv(result_dir / "trace.csv");
  std::optional<VectorXd> theta_hat;
  if (fs::exists(result_dir / "theta_hat.csv")) theta_hat = read_vector_csv(result_dir / "theta_hat.csv");
  return compute_metrics(fitted, trace, theta_hat, data);
}

std::optional<std::int64_t> median_with_missing(std::vector<std::optional<std::int64_t>> values) {
  if (values.empty()) return std::nullopt;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : inf);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (!std::isfinite(med)) return std::nullopt;
  return static_cast<std::int64_t>(std::llround(med / 100.0)) * 100;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1))
                                 : std::numeric_limits<double>::quiet_NaN();
  return {mean, sd};
}

}  // namespace

ExperimentSummary summarize(std::vector<RunOutcome> runs) {
  ExperimentSummary s;
  std::vector<double> tv, mse, nll;
  std::vector<std::optional<std::int64_t>> iters;
  for (const auto& r : runs) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    tv.push_back(r.metrics.tv);
    iters.push_back(r.metrics.iters_to_tv02);
    if (r.metrics.mse) mse.push_back(*r.metrics.mse);
    if (r.metrics.identity_nll) nll.push_back(*r.metrics.identity_nll);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.tv_mean = nan;
  s.tv_sd = nan;
  if (!tv.empty()) std::tie(s.tv_mean, s.tv_sd) = mean_sd(tv);
  s.median_iters_to_tv02 = median_with_missing(iters);
  if (!mse.empty()) {
    auto [m, sd] = mean_sd(mse);
    s.mse_mean = m;
    s.mse_sd = sd;
  }
  if (!nll.empty()) {
    auto [m, sd] = mean_sd(nll);
    s.nll_mean = m;
    s.nll_sd = sd;
  }
  s.runs = std::move(runs);
  return s;
}

ExperimentSummary cmd_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path out = config.out;
  fs::create_directories(out);
  save_config(config, (out / "config.json").string());
  std::optional<Dataset> shared;
  if (!config.resample_data) {
    shared = generate_dataset(config, config.data_seed);
    write_dataset(out / "data", *shared);
  }

  std::vector<RunOutcome> runs(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      RunOutcome& r = runs[i];
      r.seed = config.seeds[i];
      const auto start = std::chrono::steady_clock::now();
      const fs::path dir = out / ("seed_" + std::to_string(r.seed));
      try {
        std::optional<Dataset> own;
        if (!shared) {
          own = generate_dataset(config, r.seed);
          write_dataset(dir / "data", *own);
        }
        const Dataset& data = shared ? *shared : *own;
        const FitResult result = run_fit(config, data, r.seed);
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        r.metrics = compute_metrics(result.prior, result.trace, result.theta_hat, data);
        write_result(dir, config, r.seed, result, r.metrics, r.wall_seconds);
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    }
  };
  const int nthreads = std::min<int>(config.threads, static_cast<int>(runs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentSummary s = summarize(std::move(runs));

  std::ofstream runs_csv(out / "runs.csv", std::ios::binary);
  runs_csv << "seed,status," << metrics_csv_header() << ",wall_seconds,error\n";
  for (const auto& r : s.runs) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    runs_csv << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
             << (r.ok ? metrics_csv_row(r.metrics) : std::string("NA,NA,NA,NA,NA,NA")) << ','
             << format_double(r.wall_seconds) << ',' << err << '\n';
  }
  std::ofstream summary_csv(out / "summary.csv", std::ios::binary);
  summary_csv << "algorithm,prior,design,n,p,runs,failed,tv_mean,tv_sd,median_iters_to_tv02,mse_mean,mse_sd,"
                 "nll_mean,nll_sd\n";
  summary_csv << config.algorithm << ',' << config.prior << ',' << config.design << ',' << config.n << ','
              << config.p << ',' << s.runs.size() << ',' << s.failed << ',' << format_double(s.tv_mean) << ','
              << format_double(s.tv_sd) << ',' << optional_csv(s.median_iters_to_tv02) << ','
              << optional_csv(s.mse_mean) << ',' << optional_csv(s.mse_sd) << ',' << optional_csv(s.nll_mean)
              << ',' << optional_csv(s.nll_sd) << '\n';
  return s;
}

}  // namespace ebflow::cli
