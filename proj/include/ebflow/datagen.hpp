#pragma once

#include <string>
#include <string_view>

#include "ebflow/model.hpp"
#include "ebflow/rng.hpp"

namespace ebflow {

enum class PriorKind { gaussian, cauchy, skew, bimodal, custom };
enum class DesignKind { identity, iid, block02corr09, block10corr05, custom };

std::string to_string(PriorKind kind);
std::string to_string(DesignKind kind);
PriorKind parse_prior_kind(std::string_view name);
DesignKind parse_design_kind(std::string_view name);

struct PriorSpec {
  PriorKind kind = PriorKind::gaussian;
  double bound = 3.0;  // M
  int grid_size = 61;  // K
  VectorXd custom_weights;  // unnormalized, length K; custom kind only
};

struct DesignSpec {
  DesignKind kind = DesignKind::iid;
  Index n = 500;
  Index p = 1000;
  MatrixXd custom_covariance;  // p x p; custom kind only
};

/// Unnormalized density of the named prior (before truncation to [-M, M]).
double prior_density(PriorKind kind, double x);

/// Discretizes the named density on the K-point grid over [-M, M]:
/// w_k proportional to density(b_k), renormalized.
GridPrior make_prior(const PriorSpec& spec);

/// Identity, or rows i.i.d. N(0, Sigma_X / n) for the random designs.
MatrixXd make_design(const DesignSpec& spec, Rng& rng);

/// Population column covariance Sigma_X of sqrt(n) X for a random design.
MatrixXd design_covariance(const DesignSpec& spec);

/// theta_j ~ g i.i.d. (categorical over atoms), sigma^2 = s^2 f/(1-f) with s^2 the
/// sample variance of the entries of X theta, y = X theta + N(0, sigma^2 I).
/// theta uses `theta_rng`, noise uses `noise_rng`.
LinearModel simulate(const GridPrior& prior, const MatrixXd& X, double noise_fraction,
                     Rng& theta_rng, Rng& noise_rng);

/// Categorical draw over atom indices with the given weights.
Index sample_atom(const VectorXd& weights, Rng& rng);

}  // namespace ebflow
