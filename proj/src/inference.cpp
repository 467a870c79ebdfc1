#include "ebflow/inference.hpp"

#include <cmath>
#include <limits>

#include "ebflow/errors.hpp"
#include "ebflow/seqnpmle.hpp"

namespace ebflow {

double shrinkage(const GridPrior& prior, double tau, double phi) {
  VectorXd one(1);
  one[0] = phi;
  return evaluate_smoothed_prior(prior, tau, one).post_mean[0];
}

VectorXd shrinkage(const GridPrior& prior, double tau, const Eigen::Ref<const VectorXd>& phi) {
  return evaluate_smoothed_prior(prior, tau, phi).post_mean;
}

PosteriorMeanAccumulator::PosteriorMeanAccumulator(GridPrior prior, double tau, Index p)
    : prior_(std::move(prior)), tau_(tau), sum_(VectorXd::Zero(p)) {}

void PosteriorMeanAccumulator::add(const Eigen::Ref<const VectorXd>& phi) {
  if (phi.size() != sum_.size()) throw InvalidArgument("posterior mean: iterate has wrong length");
  sum_ += shrinkage(prior_, tau_, phi);
  ++count_;
}

void PosteriorMeanAccumulator::add_theta(const Eigen::Ref<const VectorXd>& theta) {
  if (theta.size() != sum_.size()) throw InvalidArgument("posterior mean: sample has wrong length");
  sum_ += theta;
  ++count_;
}

PosteriorMeanEstimate PosteriorMeanAccumulator::estimate() const {
  if (count_ == 0) throw InvalidArgument("posterior mean: no iterates");
  PosteriorMeanEstimate out;
  out.theta_hat = sum_ / static_cast<double>(count_);
  out.n_samples_used = count_;
  return out;
}

PosteriorMeanEstimate posterior_mean(const GridPrior& prior, double tau, std::span<const VectorXd> iterates) {
  if (iterates.empty()) throw InvalidArgument("posterior mean: empty iterate stream");
  PosteriorMeanAccumulator acc(prior, tau, iterates.front().size());
  for (const auto& phi : iterates) acc.add(phi);
  return acc.estimate();
}

double prediction_mse(const VectorXd& theta_hat, const VectorXd& theta_star, const MatrixXd& X_new) {
  if (theta_hat.size() != theta_star.size() || X_new.cols() != theta_star.size())
    throw InvalidArgument("prediction_mse: dimension mismatch");
  const double denom = (X_new * theta_star).squaredNorm();
  if (!(denom > 0.0)) throw InvalidArgument("prediction_mse: ||X_new theta*|| is zero");
  return (X_new * (theta_star - theta_hat)).squaredNorm() / denom;
}

double tv_distance(const GridPrior& a, const GridPrior& b) {
  if (!a.same_grid(b)) throw InvalidArgument("tv_distance: grids differ");
  return 0.5 * (a.weights() - b.weights()).cwiseAbs().sum();
}

double grid_w1(const GridPrior& a, const GridPrior& b) {
  if (!a.same_grid(b)) throw InvalidArgument("grid_w1: grids differ");
  double cdf_gap = 0.0;
  double total = 0.0;
  for (Index k = 0; k + 1 < a.weights().size(); ++k) {
    cdf_gap += a.weights()[k] - b.weights()[k];
    total += std::abs(cdf_gap);
  }
  return a.spacing() * total;
}

double kl(const GridPrior& a, const GridPrior& b) {
  if (!a.same_grid(b)) throw InvalidArgument("kl: grids differ");
  return kl_divergence_weights(a.weights(), b.weights());
}

double identity_marginal_nll(const LinearModel& model, const GridPrior& prior) {
  model.validate();
  if (model.n() != model.p() || !model.X.isIdentity(0.0))
    throw InvalidArgument("identity_marginal_nll requires X = I");
  const SeqObjective obj(model.y, std::sqrt(model.sigma_sq), prior.support());
  return seq_nll(obj, prior.weights());
}

double lag_autocorrelation(std::span<const double> series, int lag) {
  const auto n = series.size();
  if (lag < 0 || n < 2 || static_cast<std::size_t>(lag) >= n) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double num = 0.0;
  for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < n; ++t)
    num += (series[t] - mean) * (series[t + static_cast<std::size_t>(lag)] - mean);
  return num / denom;
}

double mean_lag_autocorrelation(const std::vector<std::vector<double>>& series, int lag) {
  double total = 0.0;
  int used = 0;
  for (const auto& s : series) {
    const double r = lag_autocorrelation(s, lag);
    if (std::isnan(r)) continue;
    total += r;
    ++used;
  }
  return used == 0 ? std::numeric_limits<double>::quiet_NaN() : total / used;
}

}  // namespace ebflow
