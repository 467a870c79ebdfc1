#include "ebflow/spline.hpp"

#include <cmath>

#include "ebflow/errors.hpp"

namespace ebflow {

SplinePenalty::SplinePenalty(double lambda, int grid_size, double spacing)
    : lambda_(lambda), spacing_(spacing) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("spline lambda must be >= 0");
  if (!(spacing > 0.0)) throw InvalidArgument("spline grid spacing must be positive");
  if (grid_size < 2) throw InvalidArgument("spline penalty needs K >= 2");
  const int rows = grid_size - 2;
  const double inv_sq = 1.0 / (spacing * spacing);
  D_ = Eigen::MatrixXd::Zero(rows, grid_size);
  for (int i = 0; i < rows; ++i) {
    D_(i, i) = inv_sq;
    D_(i, i + 1) = -2.0 * inv_sq;
    D_(i, i + 2) = inv_sq;
  }
  DtD_ = D_.transpose() * D_;
}

double SplinePenalty::value(const Eigen::VectorXd& w) const {
  if (lambda_ == 0.0) return 0.0;
  return 0.5 * lambda_ * spacing_ * (D_ * (w / spacing_)).squaredNorm();
}

Eigen::VectorXd SplinePenalty::gradient(const Eigen::VectorXd& w) const {
  if (lambda_ == 0.0) return Eigen::VectorXd::Zero(w.size());
  return lambda_ * (DtD_ * w) / spacing_;
}

}  // namespace ebflow
