#pragma once

#include <optional>
#include <vector>

#include "ebflow/ebflow.hpp"
#include "ebflow/model.hpp"
#include "ebflow/seqnpmle.hpp"
#include "ebflow/spline.hpp"

namespace ebflow {

// ---------------------------------------------------------------------------
// Mean-field CAVI in the theta parametrization.

struct MeanFieldState {
  MatrixXd q;         // p x K; row j holds the weights of q_j on the grid
  VectorXd mean;      // E_q[theta_j]
  VectorXd residual;  // y - X mean, maintained incrementally
};

/// q_j = prior for every j.
MeanFieldState init_mean_field(const LinearModel& model, const GridPrior& prior);

/// q_{j,k} proportional to w_k exp(-||x_j||^2 b_k^2 / (2 sigma^2) + c_j b_k / sigma^2),
/// c_j = (y - X_{-j} E[theta_{-j}])^T x_j; then the residual cache absorbs the
/// change in E_{q_j}[theta_j].
void cavi_coordinate_update(MeanFieldState& state, Index j, const GridPrior& prior, const LinearModel& model);

/// Coordinates j = 1..p in ascending order.
void cavi_sweep(MeanFieldState& state, const GridPrior& prior, const LinearModel& model);

/// Minimizes -sum_k f_k log w_k + spline(w) over the simplex; f_k are the
/// target frequencies. lambda = 0 gives w = f exactly. Warm-starts from
/// `current` when it is strictly positive.
GridPrior penalized_frequency_update(const VectorXd& frequencies, const GridPrior& current,
                                     const SplinePenalty* penalty, const SimplexSolveOptions& options = {},
                                     bool* converged = nullptr);

/// Prior update from the averaged coordinate posteriors.
GridPrior cavi_prior_update(const MeanFieldState& state, const GridPrior& current,
                            const SplinePenalty* penalty, const SimplexSolveOptions& options = {},
                            bool* converged = nullptr);

/// Mean-field objective (1/p) E_q[ ||y - X theta||^2 / (2 sigma^2) - sum_j log g(theta_j) + log q(theta) ],
/// without the penalty and additive constants.
double cavi_objective(const MeanFieldState& state, const GridPrior& prior, const LinearModel& model);

/// max_i |cached_i - (y - X theta)_i|.
double residual_drift(const VectorXd& cached, const LinearModel& model, const VectorXd& theta);

struct CaviOptions {
  std::int64_t iterations = 1000;
  std::optional<SplinePenalty> penalty;
  int trace_every = 10;
  SimplexSolveOptions solver{1e-8, 5000, 50};
};

FitResult fit_cavi(const LinearModel& model, const GridPrior& init_prior, const CaviOptions& options,
                   const GridPrior* truth = nullptr, MeanFieldState* final_state = nullptr);

// ---------------------------------------------------------------------------
// Gibbs sampling over grid-valued theta.

struct GibbsState {
  std::vector<int> atom;  // theta_j = b_{atom[j]}
  VectorXd theta;
  VectorXd residual;      // y - X theta, maintained incrementally
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // p x K tallies
};

/// theta_j at the atom nearest to zero (first on ties), residual recomputed.
GibbsState init_gibbs(const LinearModel& model, const GridPrior& prior);
/// State at an explicit configuration; residual recomputed.
GibbsState make_gibbs_state(const LinearModel& model, const GridPrior& prior, std::vector<int> atoms);

/// Conditional law of theta_j given theta_{-j} over the grid:
/// logits -||x_j||^2 b_k^2 / (2 sigma^2) + (y - X_{-j} theta_{-j})^T x_j b_k / sigma^2 + log w_k.
VectorXd gibbs_conditional(const GibbsState& state, Index j, const GridPrior& prior, const LinearModel& model);

/// Resamples j = 1..p in order; tallies the new values when `tally` is set.
void gibbs_sweep(GibbsState& state, const GridPrior& prior, const LinearModel& model, Rng& rng,
                 bool tally = true);

struct GibbsMcemOptions {
  int t_iter = 100;
  std::int64_t total_iters = 10000;  // sweeps, including burn-in
  int burn_in = 200;
  std::optional<SplinePenalty> penalty;
  int trace_every = 10;
  std::int64_t post_iters = 0;
  SimplexSolveOptions solver{1e-8, 5000, 50};
};

FitResult fit_gibbs_mcem(const LinearModel& model, const GridPrior& init_prior, const GibbsMcemOptions& options,
                         Rng rng, const GridPrior* truth = nullptr);

// ---------------------------------------------------------------------------
// Langevin Monte-Carlo EM in the phi parametrization.

struct LangevinMcemOptions {
  double eta_phi = 1.0;
  int t_iter = 100;
  std::int64_t total_iters = 10000;  // including burn-in
  int burn_in = 200;
  double burn_in_eta_phi = 1.0;
  std::int64_t subsample = 10000;  // S
  std::optional<SplinePenalty> penalty;
  int trace_every = 10;
  std::int64_t post_iters = 0;
  int thin = 1;
  int autocorr_coords = 20;
  SimplexSolveOptions solver{1e-8, 2000, 50};
};

/// Uniform subsample of `size` values without replacement; the whole pool
/// (in order) when size >= pool size.
VectorXd subsample_pool(const std::vector<double>& pool, std::int64_t size, Rng& rng);

FitResult fit_langevin_mcem(const ReparamContext& ctx, const GridPrior& init_prior,
                            const LangevinMcemOptions& options, Rng rng, const GridPrior* truth = nullptr);

}  // namespace ebflow
