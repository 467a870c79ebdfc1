#include <doctest.h>

#include <algorithm>

#include "ebflow/datagen.hpp"
#include "ebflow/ebflow.hpp"
#include "ebflow/errors.hpp"
#include "ebflow/inference.hpp"
#include "ebflow/seqnpmle.hpp"
#include "oracles.hpp"

using namespace ebflow;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("point-mass prior shrinks everything to the atom") {
  VectorXd w = VectorXd::Zero(5);
  w[3] = 1.0;
  const GridPrior g(equispaced_grid(2.0, 5), w);
  Rng rng(1, 0);
  std::vector<VectorXd> its{3.0 * rng.normal_vector(6), 3.0 * rng.normal_vector(6)};
  const auto est = posterior_mean(g, 0.4, its);
  CHECK((est.theta_hat.array() == 1.0).all());
  CHECK(est.n_samples_used == 2);
}

TEST_CASE("symmetric two-atom prior maps zero to zero") {
  const GridPrior g(vec({-1.0, 1.0}), vec({0.5, 0.5}));
  CHECK(shrinkage(g, 0.7, 0.0) == 0.0);
}

TEST_CASE("empty iterate stream is an error") {
  const GridPrior g = GridPrior::uniform(vec({-1.0, 1.0}));
  CHECK_THROWS_AS(posterior_mean(g, 0.5, std::vector<VectorXd>{}), InvalidArgument);
  PosteriorMeanAccumulator acc(g, 0.5, 3);
  CHECK_THROWS_AS(acc.estimate(), InvalidArgument);
}

TEST_CASE("shrinkage map range and order invariance") {
  Rng rng(2, 0);
  const GridPrior g(equispaced_grid(3.0, 21), oracle::random_simplex(21, rng));
  const VectorXd phi = 20.0 * rng.normal_vector(1000);
  const VectorXd s = shrinkage(g, 0.3, phi);
  CHECK(s.minCoeff() >= -3.0);
  CHECK(s.maxCoeff() <= 3.0);

  std::vector<VectorXd> its;
  for (int i = 0; i < 7; ++i) its.push_back(rng.normal_vector(4));
  const auto a = posterior_mean(g, 0.3, its);
  std::reverse(its.begin(), its.end());
  const auto b = posterior_mean(g, 0.3, its);
  CHECK((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("identity design Monte Carlo posterior mean matches the exact posterior") {
  // X = I, two-atom prior: E[theta_j | y_j] in closed form per coordinate.
  const Index p = 5;
  LinearModel m{MatrixXd::Identity(p, p), vec({-1.5, -0.2, 0.0, 0.4, 2.0}), 0.5, std::nullopt};
  VectorXd w = VectorXd::Zero(5);
  w[0] = 0.3;
  w[4] = 0.7;
  const GridPrior g(equispaced_grid(1.0, 5), w);
  const auto ctx = build_reparam(m);
  VectorXd exact(p);
  for (Index j = 0; j < p; ++j)
    exact[j] = oracle::coordinate_posterior(m.y[j], std::sqrt(m.sigma_sq), g.support(), w).dot(g.support());

  // Exact phi draws: theta_j | y_j from the two-atom posterior, then
  // z_j | theta_j, y_j ~ N(tau^2 (y_j - theta_j) / sigma^2, tau^2 (sigma^2 - tau^2) / sigma^2).
  const double s2 = m.sigma_sq, t2 = ctx.tau_sq;
  Rng rng(3, 0);
  const int draws = 20000;
  std::vector<VectorXd> its;
  its.reserve(draws);
  MatrixXd shrunk(draws, p);
  for (int d = 0; d < draws; ++d) {
    VectorXd phi(p);
    for (Index j = 0; j < p; ++j) {
      const VectorXd post = oracle::coordinate_posterior(m.y[j], std::sqrt(s2), g.support(), w);
      const double theta = g.support()[sample_atom(post, rng)];
      phi[j] = theta + t2 * (m.y[j] - theta) / s2 + std::sqrt(t2 * (s2 - t2) / s2) * rng.normal();
    }
    shrunk.row(d) = shrinkage(g, ctx.tau(), phi).transpose();
    its.push_back(std::move(phi));
  }
  const auto est = posterior_mean(g, ctx.tau(), its);
  CHECK(est.n_samples_used == draws);
  for (Index j = 0; j < p; ++j) {
    const double mean = shrunk.col(j).mean();
    const double sd = std::sqrt((shrunk.col(j).array() - mean).square().sum() / (draws - 1));
    CHECK(est.theta_hat[j] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::abs(est.theta_hat[j] - exact[j]) <= 3.0 * sd / std::sqrt(static_cast<double>(draws)));
  }
}

TEST_CASE("prediction MSE") {
  Rng rng(4, 0);
  MatrixXd Xn(6, 4);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 4; ++j) Xn(i, j) = rng.normal();
  const VectorXd theta = rng.normal_vector(4);
  CHECK(prediction_mse(theta, theta, Xn) == 0.0);
  CHECK(prediction_mse(VectorXd::Zero(4), theta, Xn) == doctest::Approx(1.0));
  CHECK(prediction_mse(2.0 * theta, theta, Xn) == doctest::Approx(1.0));
  CHECK_THROWS_AS(prediction_mse(theta, VectorXd::Zero(4), Xn), InvalidArgument);
}

TEST_CASE("TV, W1 and KL") {
  const VectorXd grid = vec({-1.0, 1.0});
  const GridPrior a(grid, vec({0.6, 0.4})), b(grid, vec({0.5, 0.5}));
  const GridPrior e1(grid, vec({1.0, 0.0})), e2(grid, vec({0.0, 1.0}));
  CHECK(tv_distance(a, a) == 0.0);
  CHECK(tv_distance(e1, e2) == 1.0);
  CHECK(tv_distance(a, b) == doctest::Approx(0.1));
  CHECK(grid_w1(e1, e2) == doctest::Approx(2.0));
  CHECK(kl(a, a) == 0.0);
  CHECK(std::isinf(kl(b, e1)));
  const GridPrior other(vec({-2.0, 2.0}), vec({0.5, 0.5}));
  CHECK_THROWS_AS(tv_distance(a, other), InvalidArgument);
  CHECK_THROWS_AS(grid_w1(a, other), InvalidArgument);
  CHECK_THROWS_AS(kl(a, other), InvalidArgument);
}

TEST_CASE("metric properties on random triples") {
  Rng rng(5, 0);
  const VectorXd grid = equispaced_grid(3.0, 61);
  for (int rep = 0; rep < 200; ++rep) {
    const GridPrior a(grid, oracle::random_simplex(61, rng));
    const GridPrior b(grid, oracle::random_simplex(61, rng));
    const GridPrior c(grid, oracle::random_simplex(61, rng));
    CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)).epsilon(1e-15));
    CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15);
    CHECK(grid_w1(a, b) <= 2.0 * 3.0 * tv_distance(a, b) + 1e-12);
  }
}

TEST_CASE("W1 of neighbouring point masses is the spacing") {
  const VectorXd grid = equispaced_grid(1.0, 5);
  VectorXd w1 = VectorXd::Zero(5), w2 = VectorXd::Zero(5);
  w1[1] = 1.0;
  w2[2] = 1.0;
  CHECK(grid_w1(GridPrior(grid, w1), GridPrior(grid, w2)) == doctest::Approx(0.5));
}

TEST_CASE("identity marginal NLL is the sequence-model NLL") {
  LinearModel m{MatrixXd::Identity(3, 3), vec({-0.5, 0.2, 1.4}), 0.8, std::nullopt};
  Rng rng(6, 0);
  const GridPrior g(equispaced_grid(2.0, 9), oracle::random_simplex(9, rng));
  const SeqObjective obj(m.y, std::sqrt(0.8), g.support());
  CHECK(identity_marginal_nll(m, g) == doctest::Approx(seq_nll(obj, g.weights())).epsilon(1e-15));
  CHECK(identity_marginal_nll(m, g) ==
        doctest::Approx(oracle::seq_nll(m.y, std::sqrt(0.8), g.support(), g.weights())).epsilon(1e-10));
  m.X(0, 1) = 0.1;
  CHECK_THROWS_AS(identity_marginal_nll(m, g), InvalidArgument);
}

TEST_CASE("lag autocorrelation") {
  std::vector<double> alt{1, -1, 1, -1, 1, -1, 1, -1};
  CHECK(lag_autocorrelation(alt, 1) < -0.8);
  CHECK(std::isnan(lag_autocorrelation(std::vector<double>{1.0, 1.0, 1.0}, 1)));
  Rng rng(7, 0);
  std::vector<double> ar(20000);
  double x = 0.0;
  for (auto& v : ar) v = x = 0.9 * x + rng.normal();
  CHECK(lag_autocorrelation(ar, 1) == doctest::Approx(0.9).epsilon(0.02));
}
