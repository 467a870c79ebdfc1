#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ebflow/model.hpp"
#include "ebflow/spline.hpp"

namespace ebflow {

/// Per-iteration step sizes (eta^phi_t, eta^w_t), t = 1, 2, ...
///
/// The first `burn_in` iterations use eta^phi = burn_in_eta_phi and
/// eta^w = 0 (weights frozen). Afterwards:
///   constant:  eta^phi_t = eta_phi,  eta^w_t = eta_w
///   loglinear: eta^phi_t = start * (end/start)^((t-1)/(horizon-1)),
///              eta^w_t = ratio * eta^phi_t
/// so the log-linear curve hits `start` at t = 1 and `end` at t = horizon.
struct StepSchedule {
  enum class Kind { constant, loglinear };

  Kind kind = Kind::loglinear;
  double eta_phi = 1.0;        // constant
  double eta_w = 0.01;         // constant
  double eta_phi_start = 1.0;  // loglinear
  double eta_phi_end = 0.1;    // loglinear
  int horizon = 10000;         // loglinear
  double ratio = 0.01;         // loglinear, eta^w / eta^phi
  int burn_in = 200;
  double burn_in_eta_phi = 1.0;

  static StepSchedule constant(double eta_phi, double eta_w, int burn_in = 200);
  static StepSchedule loglinear(double start, double end, int horizon, double ratio, int burn_in = 200);

  double eta_phi_at(std::int64_t t) const;
  double eta_w_at(std::int64_t t) const;  // 0 during burn-in
  void validate() const;
};

struct TraceRecord {
  std::int64_t iter = 0;
  double eta_phi = 0.0;
  double eta_w = 0.0;
  double tv = std::numeric_limits<double>::quiet_NaN();       // NaN: not recorded
  double seq_nll = std::numeric_limits<double>::quiet_NaN();  // NaN: not recorded
  int clamp_count = 0;
};

struct FitResult {
  FitResult(std::string algorithm_name, GridPrior initial)
      : algorithm(std::move(algorithm_name)), prior(std::move(initial)) {}

  std::string algorithm;
  GridPrior prior;
  std::vector<TraceRecord> trace;  // one record per iteration
  std::optional<VectorXd> theta_hat;
  std::int64_t posterior_samples = 0;
  std::vector<VectorXd> phi_samples;  // opt-in raw dump of post-fit iterates
  /// Mean lag-1 / lag-10 autocorrelation over tracked coordinates of post-fit iterates.
  double autocorr_lag1 = std::numeric_limits<double>::quiet_NaN();
  double autocorr_lag10 = std::numeric_limits<double>::quiet_NaN();
  std::int64_t total_clamps = 0;
  std::vector<std::string> warnings;
};

/// One unadjusted Langevin step, consuming exactly p standard normals.
///   plain:          phi' = phi - (eta/L) grad U_g(phi) + sqrt(2 eta / L) xi,  L = lambda_max_drift
///   preconditioned: phi' = phi - eta Q^{-1} grad U_g(phi) + sqrt(2 eta) Q^{-1/2} xi
ChainState ula_step(const ReparamContext& ctx, const GridPrior& prior, ChainState state, double eta_phi,
                    bool precond = false);

struct WeightStepResult {
  GridPrior prior;
  int clamped = 0;          // atoms clamped at zero (penalized update only)
  double seq_nll = 0.0;     // -(1/p) sum_j log [N_tau * g](phi_j) under the input weights
};

/// Fisher-Rao weight update from the coordinates of phi:
///   w'_k = w_k + eta w_k [ (1/p) sum_j N_tau(b_k - phi_j) / [N_tau * g](phi_j) - 1
///                          - lambda (D^T D w / Delta)_k + lambda sum_i w_i (D^T D w / Delta)_i ].
/// Negative entries (possible only with a penalty) are clamped to zero and
/// the weights renormalized.
WeightStepResult weight_step(const GridPrior& prior, const Eigen::Ref<const VectorXd>& phi, double tau,
                             double eta_w, const SplinePenalty* penalty = nullptr);

struct EbflowOptions {
  StepSchedule schedule;
  std::optional<SplinePenalty> penalty;
  std::int64_t total_iters = 10000;  // includes burn-in
  bool precond = false;
  int trace_every = 10;
  std::int64_t post_iters = 0;  // T': frozen-weight iterates for posterior means
  int thin = 1;
  bool keep_phi_samples = false;
  int autocorr_coords = 20;
};

/// Joint Langevin / Fisher-Rao iteration: each iteration advances phi by one
/// ULA step under the current prior, then updates the weights from the fresh
/// phi (weights frozen during burn-in). Starts from phi = 0.
FitResult fit_ebflow(const ReparamContext& ctx, const GridPrior& init_prior, const EbflowOptions& options,
                     Rng rng, const GridPrior* truth = nullptr);

/// Shared post-fit sampling: runs `post_iters` frozen-prior ULA steps and
/// accumulates posterior means of theta into `result`.
void sample_posterior_mean(const ReparamContext& ctx, ChainState& state, double eta_phi, bool precond,
                           std::int64_t post_iters, int thin, bool keep_samples, int autocorr_coords,
                           FitResult& result);

}  // namespace ebflow
