#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "ebflow/datagen.hpp"
#include "ebflow/errors.hpp"
#include "oracles.hpp"

using namespace ebflow;

TEST_CASE("default grid has spacing 0.1") {
  const GridPrior g = make_prior({PriorKind::gaussian, 3.0, 61, {}});
  CHECK(g.size() == 61);
  CHECK(g.spacing() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g.lower() == -3.0);
  CHECK(g.upper() == 3.0);
}

TEST_CASE("gaussian weight at zero equals direct normalization") {
  const GridPrior g = make_prior({PriorKind::gaussian, 3.0, 61, {}});
  double total = 0.0;
  for (int k = 0; k < 61; ++k) total += oracle::normal_pdf(-3.0 + 0.1 * k, 1.0);
  CHECK(g.weights()[30] == doctest::Approx(oracle::normal_pdf(0.0, 1.0) / total).epsilon(1e-12));
}

TEST_CASE("bimodal and cauchy priors are symmetric") {
  for (auto kind : {PriorKind::bimodal, PriorKind::cauchy, PriorKind::gaussian}) {
    const GridPrior g = make_prior({kind, 3.0, 61, {}});
    for (int k = 0; k < 61; ++k) CHECK(std::abs(g.weights()[k] - g.weights()[60 - k]) <= 1e-12);
  }
}

TEST_CASE("skew prior puts more mass on the left") {
  const GridPrior g = make_prior({PriorKind::skew, 3.0, 61, {}});
  CHECK(g.weights().head(30).sum() > g.weights().tail(30).sum());
}

TEST_CASE("names round-trip") {
  for (auto k : {PriorKind::gaussian, PriorKind::cauchy, PriorKind::skew, PriorKind::bimodal})
    CHECK(parse_prior_kind(to_string(k)) == k);
  for (auto k : {DesignKind::identity, DesignKind::iid, DesignKind::block02corr09, DesignKind::block10corr05})
    CHECK(parse_design_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_prior_kind("laplace"), InvalidArgument);
  CHECK_THROWS_AS(parse_design_kind("toeplitz"), InvalidArgument);
}

TEST_CASE("identity design") {
  Rng rng(1, streams::kDesign);
  CHECK(make_design({DesignKind::identity, 4, 4, {}}, rng).isIdentity(0.0));
  CHECK_THROWS_AS(make_design({DesignKind::identity, 4, 5, {}}, rng), InvalidArgument);
}

TEST_CASE("block design dimension checks") {
  Rng rng(1, streams::kDesign);
  CHECK_THROWS_AS(make_design({DesignKind::block02corr09, 10, 5, {}}, rng), InvalidArgument);
  CHECK_THROWS_AS(make_design({DesignKind::block10corr05, 10, 25, {}}, rng), InvalidArgument);
}

TEST_CASE("block02corr0.9 sample covariance of sqrt(n) X") {
  const Index n = 100000;
  Rng rng(2, streams::kDesign);
  const DesignSpec spec{DesignKind::block02corr09, n, 4, {}};
  const MatrixXd X = make_design(spec, rng) * std::sqrt(static_cast<double>(n));
  const MatrixXd S = X.transpose() * X / static_cast<double>(n);
  CHECK((S - design_covariance(spec)).cwiseAbs().maxCoeff() <= 0.02);
  CHECK(design_covariance(spec)(0, 1) == 0.9);
  CHECK(design_covariance(spec)(1, 2) == 0.0);
}

TEST_CASE("block10corr0.5 population covariance") {
  const MatrixXd C = design_covariance({DesignKind::block10corr05, 10, 20, {}});
  CHECK(C(0, 9) == 0.5);
  CHECK(C(0, 10) == 0.0);
  CHECK(C(15, 15) == 1.0);
}

TEST_CASE("iid design operator norm sits near the Marchenko-Pastur edge") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed, streams::kDesign);
    const MatrixXd X = make_design({DesignKind::iid, 1000, 1000, {}}, rng);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(X.transpose() * X, Eigen::EigenvaluesOnly);
    const double op = std::sqrt(es.eigenvalues().maxCoeff());
    CHECK(op >= 1.8);
    CHECK(op <= 2.2);
  }
}

TEST_CASE("noise calibration") {
  const GridPrior g = make_prior({PriorKind::gaussian, 3.0, 61, {}});
  Rng drng(3, streams::kDesign);
  const MatrixXd X = make_design({DesignKind::iid, 500, 200, {}}, drng);
  for (double f : {0.5, 0.2}) {
    Rng t(3, streams::kTheta), e(3, streams::kNoise);
    const auto m = simulate(g, X, f, t, e);
    const VectorXd s = X * *m.theta_star;
    const double var = (s.array() - s.mean()).square().sum() / (s.size() - 1);
    CHECK(m.sigma_sq == doctest::Approx(var * f / (1.0 - f)).epsilon(1e-12));
    // Realized noise explains about the requested share of the variance.
    const VectorXd eps = m.y - s;
    const double eps_var = eps.squaredNorm() / eps.size();
    CHECK(std::abs(eps_var / (eps_var + var) - f) <= 0.05 * f);
  }
}

TEST_CASE("theta draws lie on the grid and follow the weights") {
  const GridPrior g = make_prior({PriorKind::bimodal, 3.0, 61, {}});
  Rng drng(4, streams::kDesign), t(4, streams::kTheta), e(4, streams::kNoise);
  const MatrixXd X = make_design({DesignKind::iid, 50, 20000, {}}, drng);
  const auto m = simulate(g, X, 0.5, t, e);
  VectorXd freq = VectorXd::Zero(61);
  for (Index j = 0; j < m.p(); ++j) {
    const double k = ((*m.theta_star)[j] + 3.0) / 0.1;
    REQUIRE(std::abs(k - std::round(k)) < 1e-9);
    freq[static_cast<Index>(std::lround(k))] += 1.0 / m.p();
  }
  CHECK(0.5 * (freq - g.weights()).cwiseAbs().sum() < 0.05);
}

TEST_CASE("point mass at zero has no signal") {
  VectorXd w = VectorXd::Zero(61);
  w[30] = 1.0;
  const GridPrior g(equispaced_grid(3.0, 61), w);
  Rng drng(5, streams::kDesign), t(5, streams::kTheta), e(5, streams::kNoise);
  const MatrixXd X = make_design({DesignKind::iid, 20, 10, {}}, drng);
  CHECK_THROWS_AS(simulate(g, X, 0.5, t, e), NumericalError);
}

TEST_CASE("simulation is reproducible") {
  const GridPrior g = make_prior({PriorKind::cauchy, 3.0, 61, {}});
  auto once = [&] {
    Rng drng(6, streams::kDesign), t(6, streams::kTheta), e(6, streams::kNoise);
    const MatrixXd X = make_design({DesignKind::block10corr05, 30, 20, {}}, drng);
    return simulate(g, X, 0.2, t, e);
  };
  const auto a = once(), b = once();
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(*a.theta_star == *b.theta_star);
}
