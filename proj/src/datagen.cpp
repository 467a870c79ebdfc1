#include "ebflow/datagen.hpp"

#include <cmath>
#include <numbers>

#include "ebflow/errors.hpp"

namespace ebflow {

namespace {

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::cauchy: return "cauchy";
    case PriorKind::skew: return "skew";
    case PriorKind::bimodal: return "bimodal";
    case PriorKind::custom: return "custom";
  }
  return "unknown";
}

std::string to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::identity: return "identity";
    case DesignKind::iid: return "iid";
    case DesignKind::block02corr09: return "block02corr0.9";
    case DesignKind::block10corr05: return "block10corr0.5";
    case DesignKind::custom: return "custom";
  }
  return "unknown";
}

PriorKind parse_prior_kind(std::string_view name) {
  if (name == "gaussian") return PriorKind::gaussian;
  if (name == "cauchy") return PriorKind::cauchy;
  if (name == "skew") return PriorKind::skew;
  if (name == "bimodal") return PriorKind::bimodal;
  if (name == "custom") return PriorKind::custom;
  throw InvalidArgument("unknown prior kind '" + std::string(name) + "'");
}

DesignKind parse_design_kind(std::string_view name) {
  if (name == "identity") return DesignKind::identity;
  if (name == "iid") return DesignKind::iid;
  if (name == "block02corr0.9") return DesignKind::block02corr09;
  if (name == "block10corr0.5") return DesignKind::block10corr05;
  if (name == "custom") return DesignKind::custom;
  throw InvalidArgument("unknown design kind '" + std::string(name) + "'");
}

double prior_density(PriorKind kind, double x) {
  switch (kind) {
    case PriorKind::gaussian:
      return normal_pdf(x, 0.0, 1.0);
    case PriorKind::cauchy: {
      constexpr double scale = 0.6;
      const double z = x / scale;
      return 1.0 / (std::numbers::pi * scale * (1.0 + z * z));
    }
    case PriorKind::skew:
      return (normal_pdf(x, -2.0, 0.5) + normal_pdf(x, -1.5, 1.0) + normal_pdf(x, 0.0, 2.0)) / 3.0;
    case PriorKind::bimodal:
      return 0.5 * normal_pdf(x, -1.5, 0.5) + 0.5 * normal_pdf(x, 1.5, 0.5);
    case PriorKind::custom:
      break;
  }
  throw InvalidArgument("prior_density: no closed-form density for this kind");
}

GridPrior make_prior(const PriorSpec& spec) {
  VectorXd grid = equispaced_grid(spec.bound, spec.grid_size);
  if (spec.kind == PriorKind::custom) {
    if (spec.custom_weights.size() != spec.grid_size)
      throw InvalidArgument("custom prior weights must have length K");
    return GridPrior::normalized(std::move(grid), spec.custom_weights);
  }
  VectorXd raw(grid.size());
  for (Index k = 0; k < grid.size(); ++k) raw[k] = prior_density(spec.kind, grid[k]);
  return GridPrior::normalized(std::move(grid), raw);
}

MatrixXd design_covariance(const DesignSpec& spec) {
  const Index p = spec.p;
  switch (spec.kind) {
    case DesignKind::identity:
    case DesignKind::iid:
      return MatrixXd::Identity(p, p);
    case DesignKind::block02corr09:
    case DesignKind::block10corr05: {
      const bool pairs = spec.kind == DesignKind::block02corr09;
      const Index block = pairs ? 2 : 10;
      const double rho = pairs ? 0.9 : 0.5;
      if (p % block != 0)
        throw InvalidArgument(to_string(spec.kind) + " requires p divisible by " + std::to_string(block));
      MatrixXd cov = MatrixXd::Zero(p, p);
      for (Index start = 0; start < p; start += block) {
        cov.block(start, start, block, block).setConstant(rho);
        cov.block(start, start, block, block).diagonal().setOnes();
      }
      return cov;
    }
    case DesignKind::custom:
      if (spec.custom_covariance.rows() != p || spec.custom_covariance.cols() != p)
        throw InvalidArgument("custom design covariance must be p x p");
      return spec.custom_covariance;
  }
  throw InvalidArgument("unknown design kind");
}

MatrixXd make_design(const DesignSpec& spec, Rng& rng) {
  if (spec.n <= 0 || spec.p <= 0) throw InvalidArgument("design dimensions must be positive");
  if (spec.kind == DesignKind::identity) {
    if (spec.n != spec.p) throw InvalidArgument("identity design requires n = p");
    return MatrixXd::Identity(spec.n, spec.p);
  }
  const MatrixXd cov = design_covariance(spec);
  // Draw row by row so each row is a fresh N(0, I_p) vector.
  MatrixXd Z(spec.n, spec.p);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.p; ++j) Z(i, j) = rng.normal();
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  if (spec.kind == DesignKind::iid) return Z * scale;
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw InvalidArgument("design covariance is not positive definite");
  MatrixXd X = Z * llt.matrixL().transpose();
  X *= scale;
  return X;
}

Index sample_atom(const VectorXd& weights, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  Index last_positive = 0;
  for (Index k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = k;
    cumulative += weights[k];
    if (u < cumulative) return k;
  }
  return last_positive;
}

LinearModel simulate(const GridPrior& prior, const MatrixXd& X, double noise_fraction,
                     Rng& theta_rng, Rng& noise_rng) {
  if (!(noise_fraction > 0.0 && noise_fraction < 1.0))
    throw InvalidArgument("noise fraction must lie in (0, 1)");
  const Index p = X.cols();
  const Index n = X.rows();
  if (n < 2) throw InvalidArgument("simulate needs at least 2 observations");
  VectorXd theta(p);
  for (Index j = 0; j < p; ++j) theta[j] = prior.support()[sample_atom(prior.weights(), theta_rng)];
  const VectorXd signal = X * theta;
  const double mean = signal.mean();
  const double signal_var = (signal.array() - mean).square().sum() / static_cast<double>(n - 1);
  if (!(signal_var > 0.0)) throw NumericalError("X theta has zero sample variance");

  LinearModel model;
  model.X = X;
  model.sigma_sq = signal_var * noise_fraction / (1.0 - noise_fraction);
  const double sigma = std::sqrt(model.sigma_sq);
  model.y = signal;
  for (Index i = 0; i < n; ++i) model.y[i] += sigma * noise_rng.normal();
  model.theta_star = std::move(theta);
  return model;
}

}  // namespace ebflow
