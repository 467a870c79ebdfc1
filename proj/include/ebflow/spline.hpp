#pragma once

#include <Eigen/Dense>

namespace ebflow {

/// Discretized smoothing-spline penalty (lambda/2) int g''^2 on an equally
/// spaced grid with g(b_k) ~ w_k / Delta:
///
///   value(w)    = (lambda Delta / 2) sum_i [D (w / Delta)]_i^2
///   gradient(w) = lambda D^T D w / Delta
///
/// D is the (K-2) x K second-difference matrix with rows (1, -2, 1) / Delta^2.
class SplinePenalty {
 public:
  SplinePenalty(double lambda, int grid_size, double spacing);

  double lambda() const { return lambda_; }
  double spacing() const { return spacing_; }
  const Eigen::MatrixXd& D() const { return D_; }
  const Eigen::MatrixXd& DtD() const { return DtD_; }

  double value(const Eigen::VectorXd& w) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;

 private:
  double lambda_;
  double spacing_;
  Eigen::MatrixXd D_;
  Eigen::MatrixXd DtD_;
};

}  // namespace ebflow
