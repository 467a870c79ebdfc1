#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ebflow/rng.hpp"

namespace ebflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Evenly spaced grid of K points spanning [-M, M].
VectorXd equispaced_grid(double bound, int size);

/// Discrete prior sum_k w_k delta_{b_k} on an equally spaced grid.
///
/// Weights are nonnegative and sum to one within 1e-12; the support is
/// strictly increasing with constant spacing; K >= 2.
class GridPrior {
 public:
  GridPrior(VectorXd support, VectorXd weights);

  static GridPrior uniform(VectorXd support);
  /// Normalizes nonnegative raw weights before validating.
  static GridPrior normalized(VectorXd support, const VectorXd& raw_weights);

  const VectorXd& support() const { return support_; }
  const VectorXd& weights() const { return weights_; }
  int size() const { return static_cast<int>(support_.size()); }
  double spacing() const { return spacing_; }
  double lower() const { return support_[0]; }
  double upper() const { return support_[support_.size() - 1]; }

  /// Same grid, new weights (validated).
  GridPrior with_weights(VectorXd weights) const;
  bool same_grid(const GridPrior& other) const;
  bool strictly_positive() const { return (weights_.array() > 0.0).all(); }

 private:
  VectorXd support_;
  VectorXd weights_;
  double spacing_ = 0.0;
};

struct LinearModel {
  MatrixXd X;
  VectorXd y;
  double sigma_sq = 1.0;
  std::optional<VectorXd> theta_star;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
  void validate() const;
};

/// Q^{-1} and Q^{-1/2} for Q = X^T Sigma^{-1} X + tau^{-2} I.
struct Preconditioner {
  MatrixXd q_inv;
  MatrixXd q_inv_sqrt;
  VectorXd eigenvalues;  // of Q, ascending
};

/// Precomputed quantities of the phi-reparametrization phi = theta + z,
/// z ~ N(0, tau^2 I), under which y = X phi + N(0, Sigma) with
/// Sigma = sigma^2 I - tau^2 X X^T. Immutable after build_reparam.
struct ReparamContext {
  double tau_sq = 0.0;
  double sigma_sq = 0.0;
  Eigen::LLT<MatrixXd> sigma_factor;
  MatrixXd A;              // X^T Sigma^{-1} X
  VectorXd b_vec;          // X^T Sigma^{-1} y
  double half_quad_y = 0;  // y^T Sigma^{-1} y / 2
  double lambda_max_xxt = 0.0;
  double lambda_max_drift = 0.0;  // lambda_max(A + tau^{-2} I)
  std::optional<Preconditioner> precond;

  double tau() const;
  Index p() const { return A.rows(); }
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// normalized all-ones vector. Stops when the Rayleigh quotient changes by
/// less than rel_tol relative.
double power_iteration_lambda_max(const MatrixXd& sym, double rel_tol = 1e-10,
                                  int max_iter = 5000);

/// lambda_max of a symmetric PSD matrix: dense eigensolve for dimension <= 64,
/// power iteration otherwise.
double lambda_max_symmetric(const MatrixXd& sym);

/// lambda_max(X X^T), computed on the smaller of the two Gram matrices.
double lambda_max_xxt(const MatrixXd& X);

/// Largest tau^2 the reparametrization admits (exclusive): sigma^2 / lambda_max(XX^T).
double tau_sq_bound(double sigma_sq, double lambda_max_xxt);

/// Builds the reparametrization context. With no explicit tau^2, uses
/// tau^2 = sigma^2 / (2 lambda_max(X X^T)).
ReparamContext build_reparam(const LinearModel& model, std::optional<double> tau_sq = std::nullopt,
                             bool with_preconditioner = false);

/// Log-density of N(0, tau^2) at x.
inline double log_normal_pdf(double x, double tau) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  return -0.5 * (x / tau) * (x / tau) - std::log(tau) - kHalfLog2Pi;
}

/// Per-coordinate quantities of the smoothed prior N_tau * g evaluated at
/// each entry of phi, computed in log-space with max-subtraction over the
/// atoms that carry positive weight.
struct SmoothedPriorEval {
  VectorXd log_density;  // log [N_tau * g](phi_j)
  VectorXd post_mean;    // E[theta_j | phi_j] under g
  /// (1/m) sum_j w_k N_tau(b_k - phi_j) / [N_tau * g](phi_j); only filled on request.
  VectorXd mean_responsibility;
};

SmoothedPriorEval evaluate_smoothed_prior(const GridPrior& prior, double tau,
                                          const Eigen::Ref<const VectorXd>& phi,
                                          bool with_responsibility = false);

/// U_g(phi) = (y - X phi)^T Sigma^{-1} (y - X phi) / 2 - sum_j log [N_tau * g](phi_j).
double neg_log_posterior(const ReparamContext& ctx, const GridPrior& prior,
                         const Eigen::Ref<const VectorXd>& phi);

/// grad U_g(phi) = A phi - b + tau^{-2} (phi_j - E[theta_j | phi_j])_j.
VectorXd neg_log_posterior_grad(const ReparamContext& ctx, const GridPrior& prior,
                                const Eigen::Ref<const VectorXd>& phi);

/// Langevin iterate with its own generator. Advanced by a single owner.
struct ChainState {
  VectorXd phi;
  std::int64_t iter = 0;
  Rng rng;
};

}  // namespace ebflow
