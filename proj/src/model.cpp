#include "ebflow/model.hpp"

#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ebflow/errors.hpp"

namespace ebflow {

VectorXd equispaced_grid(double bound, int size) {
  if (size < 2) throw InvalidArgument("grid needs at least 2 points");
  if (!(bound > 0.0) || !std::isfinite(bound)) throw InvalidArgument("grid bound must be positive");
  VectorXd grid(size);
  const double step = 2.0 * bound / (size - 1);
  for (int k = 0; k < size; ++k) grid[k] = -bound + k * step;
  grid[size - 1] = bound;
  return grid;
}

GridPrior::GridPrior(VectorXd support, VectorXd weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  const Index K = support_.size();
  if (K < 2) throw InvalidArgument("GridPrior needs K >= 2 support points");
  if (weights_.size() != K) throw InvalidArgument("GridPrior: support/weight size mismatch");
  if (!support_.allFinite() || !weights_.allFinite())
    throw InvalidArgument("GridPrior: non-finite support or weights");
  spacing_ = support_[1] - support_[0];
  if (!(spacing_ > 0.0)) throw InvalidArgument("GridPrior: support must be strictly increasing");
  for (Index k = 1; k < K; ++k) {
    const double d = support_[k] - support_[k - 1];
    if (std::abs(d - spacing_) > 1e-12 * spacing_ * std::max(1.0, std::abs(support_[k]) / spacing_))
      throw InvalidArgument("GridPrior: support must be equally spaced");
  }
  if ((weights_.array() < 0.0).any()) throw InvalidArgument("GridPrior: negative weight");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw InvalidArgument("GridPrior: weights must sum to 1");
}

GridPrior GridPrior::uniform(VectorXd support) {
  const Index K = support.size();
  return GridPrior(std::move(support), VectorXd::Constant(K, 1.0 / static_cast<double>(K)));
}

GridPrior GridPrior::normalized(VectorXd support, const VectorXd& raw_weights) {
  if ((raw_weights.array() < 0.0).any()) throw InvalidArgument("negative raw weight");
  const double total = raw_weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw InvalidArgument("raw weights have no mass");
  return GridPrior(std::move(support), raw_weights / total);
}

GridPrior GridPrior::with_weights(VectorXd weights) const {
  return GridPrior(support_, std::move(weights));
}

bool GridPrior::same_grid(const GridPrior& other) const {
  return support_.size() == other.support_.size() && support_ == other.support_;
}

void LinearModel::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw InvalidArgument("LinearModel: empty design");
  if (y.size() != X.rows()) throw InvalidArgument("LinearModel: y length != rows of X");
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
    throw InvalidArgument("LinearModel: sigma^2 must be positive");
  if (theta_star && theta_star->size() != X.cols())
    throw InvalidArgument("LinearModel: theta_star length != columns of X");
}

double ReparamContext::tau() const { return std::sqrt(tau_sq); }

double power_iteration_lambda_max(const MatrixXd& sym, double rel_tol, int max_iter) {
  const Index d = sym.rows();
  if (d == 0 || sym.cols() != d) throw InvalidArgument("power iteration needs a square matrix");
  VectorXd v = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  VectorXd w = sym * v;
  double lambda = v.dot(w);
  for (int it = 0; it < max_iter; ++it) {
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    w.noalias() = sym * v;
    const double next = v.dot(w);
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

double lambda_max_symmetric(const MatrixXd& sym) {
  if (sym.rows() <= 64) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolve failed");
    return solver.eigenvalues().maxCoeff();
  }
  return power_iteration_lambda_max(sym);
}

double lambda_max_xxt(const MatrixXd& X) {
  MatrixXd gram;
  if (X.rows() <= X.cols()) {
    gram = X * X.transpose();
  } else {
    gram = X.transpose() * X;
  }
  return lambda_max_symmetric(gram);
}

double tau_sq_bound(double sigma_sq, double lambda_max) {
  if (!(lambda_max > 0.0)) throw InvalidArgument("design has lambda_max(XX^T) = 0");
  return sigma_sq / lambda_max;
}

ReparamContext build_reparam(const LinearModel& model, std::optional<double> tau_sq,
                             bool with_preconditioner) {
  model.validate();
  ReparamContext ctx;
  ctx.sigma_sq = model.sigma_sq;
  ctx.lambda_max_xxt = lambda_max_xxt(model.X);
  const double bound = tau_sq_bound(model.sigma_sq, ctx.lambda_max_xxt);
  if (tau_sq) {
    if (!(*tau_sq > 0.0) || !std::isfinite(*tau_sq))
      throw InvalidArgument("explicit tau^2 must be positive");
    if (*tau_sq >= bound) {
      std::ostringstream msg;
      msg << "tau^2 = " << *tau_sq << " violates tau^2 < sigma^2/lambda_max(XX^T) = " << bound;
      throw NonPositiveSigma(msg.str());
    }
    ctx.tau_sq = *tau_sq;
  } else {
    ctx.tau_sq = 0.5 * bound;
  }

  const Index n = model.n();
  MatrixXd sigma = MatrixXd::Identity(n, n) * model.sigma_sq;
  sigma.noalias() -= ctx.tau_sq * model.X * model.X.transpose();
  ctx.sigma_factor.compute(sigma);
  if (ctx.sigma_factor.info() != Eigen::Success)
    throw NonPositiveSigma("Cholesky factorization of Sigma failed");

  // Z = L^{-1} X so that A = Z^T Z and b = Z^T L^{-1} y.
  const auto L = ctx.sigma_factor.matrixL();
  const MatrixXd Z = L.solve(model.X);
  const VectorXd ly = L.solve(model.y);
  if (!Z.allFinite() || !ly.allFinite()) throw NumericalError("triangular solve with Sigma failed");
  const Index p = model.p();
  ctx.A = MatrixXd::Zero(p, p);
  ctx.A.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
  ctx.A.triangularView<Eigen::StrictlyUpper>() = ctx.A.transpose();
  ctx.b_vec = Z.transpose() * ly;
  ctx.half_quad_y = 0.5 * ly.squaredNorm();

  const double inv_tau_sq = 1.0 / ctx.tau_sq;
  if (with_preconditioner) {
    MatrixXd Q = ctx.A;
    Q.diagonal().array() += inv_tau_sq;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Q);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of Q failed");
    const VectorXd& lam = eig.eigenvalues();
    if (!(lam.minCoeff() > 0.0)) throw NumericalError("Q is not positive definite");
    const MatrixXd& V = eig.eigenvectors();
    Preconditioner pc;
    pc.eigenvalues = lam;
    pc.q_inv = V * lam.cwiseInverse().asDiagonal() * V.transpose();
    pc.q_inv_sqrt = V * lam.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    ctx.lambda_max_drift = lam.maxCoeff();
    ctx.precond = std::move(pc);
  } else {
    ctx.lambda_max_drift = lambda_max_symmetric(ctx.A) + inv_tau_sq;
  }
  return ctx;
}

SmoothedPriorEval evaluate_smoothed_prior(const GridPrior& prior, double tau,
                                          const Eigen::Ref<const VectorXd>& phi,
                                          bool with_responsibility) {
  const VectorXd& w = prior.weights();
  const VectorXd& b = prior.support();
  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(w.size()));
  for (Index k = 0; k < w.size(); ++k)
    if (w[k] > 0.0) active.push_back(k);
  const Index m = phi.size();
  const Index ka = static_cast<Index>(active.size());
  const double inv_two_tau_sq = 0.5 / (tau * tau);

  // logits(j, a) = log w_a - (phi_j - b_a)^2 / (2 tau^2)
  Eigen::ArrayXXd logits(m, ka);
  Eigen::ArrayXd b_active(ka);
  for (Index a = 0; a < ka; ++a) {
    const Index k = active[static_cast<std::size_t>(a)];
    b_active[a] = b[k];
    logits.col(a) = std::log(w[k]) - (phi.array() - b[k]).square() * inv_two_tau_sq;
  }
  const Eigen::ArrayXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  logits = logits.exp();
  const Eigen::ArrayXd row_sum = logits.rowwise().sum();

  SmoothedPriorEval out;
  out.log_density = (row_max + row_sum.log()).matrix();
  out.log_density.array() += log_normal_pdf(0.0, tau);
  out.post_mean = ((logits.matrix() * b_active.matrix()).array() / row_sum).matrix();
  out.post_mean = out.post_mean.cwiseMax(prior.lower()).cwiseMin(prior.upper());
  if (with_responsibility) {
    logits.colwise() /= row_sum;
    const Eigen::ArrayXd mean_resp = logits.colwise().sum().transpose() / static_cast<double>(m);
    out.mean_responsibility = VectorXd::Zero(w.size());
    for (Index a = 0; a < ka; ++a) out.mean_responsibility[active[static_cast<std::size_t>(a)]] = mean_resp[a];
  }
  return out;
}

double neg_log_posterior(const ReparamContext& ctx, const GridPrior& prior,
                         const Eigen::Ref<const VectorXd>& phi) {
  const double quad = 0.5 * phi.dot(ctx.A * phi) - ctx.b_vec.dot(phi) + ctx.half_quad_y;
  return quad - evaluate_smoothed_prior(prior, ctx.tau(), phi).log_density.sum();
}

VectorXd neg_log_posterior_grad(const ReparamContext& ctx, const GridPrior& prior,
                                const Eigen::Ref<const VectorXd>& phi) {
  const SmoothedPriorEval eval = evaluate_smoothed_prior(prior, ctx.tau(), phi);
  VectorXd grad = ctx.A * phi - ctx.b_vec;
  grad += (phi - eval.post_mean) / ctx.tau_sq;
  if (!grad.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite drift; max |phi| = " << phi.cwiseAbs().maxCoeff();
    throw NumericalError(msg.str());
  }
  return grad;
}

}  // namespace ebflow
