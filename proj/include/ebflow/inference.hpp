#pragma once

#include <span>
#include <vector>

#include "ebflow/model.hpp"

namespace ebflow {

struct PosteriorMeanEstimate {
  VectorXd theta_hat;
  std::int64_t n_samples_used = 0;
};

/// E[theta_j | phi_j] = sum_k b_k w_k N_tau(b_k - phi_j) / sum_k w_k N_tau(b_k - phi_j).
double shrinkage(const GridPrior& prior, double tau, double phi);
VectorXd shrinkage(const GridPrior& prior, double tau, const Eigen::Ref<const VectorXd>& phi);

/// Streaming average of the shrinkage map over phi iterates; no iterate storage.
class PosteriorMeanAccumulator {
 public:
  PosteriorMeanAccumulator(GridPrior prior, double tau, Index p);

  void add(const Eigen::Ref<const VectorXd>& phi);
  /// Adds an already-computed theta-space sample (Gibbs draws, CAVI means).
  void add_theta(const Eigen::Ref<const VectorXd>& theta);
  std::int64_t count() const { return count_; }
  PosteriorMeanEstimate estimate() const;

 private:
  GridPrior prior_;
  double tau_;
  VectorXd sum_;
  std::int64_t count_ = 0;
};

/// Posterior mean from a finite set of iterates. Throws on an empty set.
PosteriorMeanEstimate posterior_mean(const GridPrior& prior, double tau, std::span<const VectorXd> iterates);

/// ||X_new (theta* - theta_hat)||^2 / ||X_new theta*||^2.
double prediction_mse(const VectorXd& theta_hat, const VectorXd& theta_star, const MatrixXd& X_new);

/// Half the l1 distance between the weight vectors; grids must match.
double tv_distance(const GridPrior& a, const GridPrior& b);

/// Wasserstein-1 on the shared grid: Delta * sum_k |F_a(b_k) - F_b(b_k)|.
double grid_w1(const GridPrior& a, const GridPrior& b);

/// D_KL(a || b); +inf when a is not absolutely continuous w.r.t. b.
double kl(const GridPrior& a, const GridPrior& b);

/// Identity-design marginal NLL: sequence-model NLL of y with tau = sigma.
double identity_marginal_nll(const LinearModel& model, const GridPrior& prior);

/// Sample autocorrelation at the given lag (NaN when undefined).
double lag_autocorrelation(std::span<const double> series, int lag);

/// Mean of the per-series lag autocorrelations, skipping undefined ones.
double mean_lag_autocorrelation(const std::vector<std::vector<double>>& series, int lag);

}  // namespace ebflow
