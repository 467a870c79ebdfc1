#include <doctest.h>

#include <numbers>

#include "ebflow/errors.hpp"
#include "ebflow/seqnpmle.hpp"
#include "ebflow/spline.hpp"
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

TEST_CASE("single Gaussian NLL") {
  const SeqObjective obj(vec({0.0}), 1.0, vec({0.0}));
  CHECK(seq_nll(obj, vec({1.0})) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("two-term NLL") {
  const SeqObjective obj(vec({-1.0, 1.0}), 1.0, vec({-1.0, 1.0}));
  const double expected = -std::log(0.5 * (oracle::normal_pdf(0.0, 1.0) + oracle::normal_pdf(2.0, 1.0)));
  CHECK(seq_nll(obj, vec({0.5, 0.5})) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("NLL matches naive double loop on random instances") {
  Rng rng(1, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index m = 1 + static_cast<Index>(rng.uniform_index(30));
    const Index K = 2 + static_cast<Index>(rng.uniform_index(10));
    const double tau = 0.2 + rng.uniform();
    const VectorXd obs = 2.0 * rng.normal_vector(m);
    const VectorXd grid = equispaced_grid(2.5, static_cast<int>(K));
    const VectorXd w = oracle::random_simplex(K, rng);
    const SeqObjective obj(obs, tau, grid);
    CHECK(std::abs(seq_nll(obj, w) - oracle::seq_nll(obs, tau, grid, w)) <= 1e-10);
  }
}

TEST_CASE("log-space fallback handles observations far from the grid") {
  const SeqObjective obj(vec({-40.0, 0.1, 35.0}), 0.05, equispaced_grid(3.0, 61));
  VectorXd w = VectorXd::Zero(61);
  w[0] = 0.5;
  w[60] = 0.5;
  const auto eval = obj.evaluate(w);
  CHECK(std::isfinite(eval.nll));
  CHECK(eval.responsibility.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-mass weights give +inf") {
  const SeqObjective obj(vec({0.0, 1.0}), 1.0, vec({0.0, 1.0}));
  const auto eval = obj.evaluate(vec({0.0, 0.0}));
  CHECK(std::isinf(eval.nll));
  CHECK_FALSE(eval.finite);
}

TEST_CASE("eta = 1 Fisher-Rao step is the EM update") {
  Rng rng(2, 0);
  const VectorXd obs = rng.normal_vector(15);
  const VectorXd grid = equispaced_grid(2.0, 7);
  const VectorXd w = oracle::random_simplex(7, rng);
  const SeqObjective obj(obs, 0.6, grid);
  VectorXd em = VectorXd::Zero(7);
  for (Index i = 0; i < obs.size(); ++i) {
    double mix = 0.0;
    for (Index k = 0; k < 7; ++k) mix += w[k] * oracle::normal_pdf(obs[i] - grid[k], 0.6);
    for (Index k = 0; k < 7; ++k) em[k] += w[k] * oracle::normal_pdf(obs[i] - grid[k], 0.6) / mix / obs.size();
  }
  CHECK((fisher_rao_step(obj, w, 1.0) - em).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("Fisher-Rao fixed points") {
  const SeqObjective single(vec({0.3}), 1.0, vec({0.3}));
  CHECK(fisher_rao_step(single, vec({1.0}), 0.5)[0] == 1.0);
  const SeqObjective sym(vec({-1.0, 1.0}), 1.0, vec({-1.0, 1.0}));
  const VectorXd next = fisher_rao_step(sym, vec({0.5, 0.5}), 0.7);
  CHECK(next[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(next[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(fisher_rao_step(sym, vec({0.5, 0.5}), 0.0), InvalidArgument);
  CHECK_THROWS_AS(fisher_rao_step(sym, vec({0.5, 0.5}), 1.5), InvalidArgument);
}

TEST_CASE("Fisher-Rao step preserves the simplex and zero atoms") {
  Rng rng(3, 0);
  const SeqObjective obj(rng.normal_vector(40), 0.3, equispaced_grid(3.0, 21));
  for (int rep = 0; rep < 200; ++rep) {
    VectorXd w = oracle::random_simplex(21, rng);
    w[5] = 0.0;
    w /= w.sum();
    const VectorXd next = fisher_rao_step(obj, w, 1e-3 + rng.uniform() * (1.0 - 1e-3));
    REQUIRE((next.array() >= 0.0).all());
    CHECK(std::abs(next.sum() - 1.0) <= 1e-12);
    CHECK(next[5] == 0.0);
  }
}

TEST_CASE("EM never increases the NLL") {
  Rng rng(4, 0);
  for (int rep = 0; rep < 500; ++rep) {
    const Index K = 2 + static_cast<Index>(rng.uniform_index(8));
    const SeqObjective obj(2.0 * rng.normal_vector(1 + static_cast<Index>(rng.uniform_index(20))),
                           0.1 + rng.uniform(), equispaced_grid(2.0, static_cast<int>(K)));
    const VectorXd w = oracle::random_simplex(K, rng);
    const double before = seq_nll(obj, w);
    CHECK(seq_nll(obj, fisher_rao_step(obj, w, 1.0)) <= before + 1e-12 * std::abs(before));
  }
}

TEST_CASE("symmetric NPMLE") {
  const SeqObjective obj(vec({-1.0, 1.0}), 1.0, vec({-1.0, 1.0}));
  const auto sol = solve_seq_npmle(obj);
  CHECK(sol.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sol.converged);
}

TEST_CASE("K = 3 NPMLE matches the simplex scan") {
  const SeqObjective obj(vec({-0.9, -0.1, 0.2, 1.1}), 0.5, vec({-1.0, 0.0, 1.0}));
  const auto sol = solve_seq_npmle(obj);
  const auto scan = simplex_scan(3, 0.005, [&](const VectorXd& w) { return seq_nll(obj, w); });
  CHECK(sol.nll <= scan.value + 1e-3);
  CHECK(std::abs(sol.nll - scan.value) <= 1e-3);
}

TEST_CASE("NPMLE concentrates when all observations sit on one atom") {
  const SeqObjective obj(vec({0.0, 0.0, 0.0, 0.0}), 0.1, vec({-1.0, 0.0, 1.0}));
  const auto sol = solve_seq_npmle(obj);
  CHECK(sol.weights[1] >= 0.99);
  const auto scan = simplex_scan(3, 0.005, [&](const VectorXd& w) { return seq_nll(obj, w); });
  CHECK(sol.nll <= scan.value + 1e-3);
}

TEST_CASE("penalized NPMLE matches the scan of the penalized objective") {
  const SeqObjective obj(vec({-0.9, -0.7, 0.8, 1.1, 1.3}), 0.4, vec({-1.0, 0.0, 1.0}));
  const SplinePenalty pen(0.05, 3, 1.0);
  const auto sol = solve_seq_npmle(obj, &pen);
  const auto scan = simplex_scan(3, 0.005, [&](const VectorXd& w) { return seq_nll(obj, w) + pen.value(w); });
  CHECK(sol.objective <= scan.value + 1e-3);
  CHECK(sol.objective == doctest::Approx(seq_nll(obj, sol.weights) + pen.value(sol.weights)));
}

TEST_CASE("max_iter is reported as non-convergence") {
  Rng rng(5, 0);
  const SeqObjective obj(rng.normal_vector(50), 0.2, equispaced_grid(3.0, 31));
  const auto sol = solve_seq_npmle(obj, nullptr, {1e-15, 3, 50});
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 3);
  CHECK(std::abs(sol.weights.sum() - 1.0) <= 1e-12);
}

TEST_CASE("simplex scan rejects K > 3") {
  CHECK_THROWS_AS(simplex_scan(4, 0.1, [](const VectorXd&) { return 0.0; }), InvalidArgument);
}

TEST_CASE("certificate along the flow") {
  const SeqObjective obj(vec({-0.9, -0.1, 0.2, 1.1}), 0.5, vec({-1.0, 0.0, 1.0}));
  const VectorXd g0 = VectorXd::Constant(3, 1.0 / 3.0);
  const auto trace = run_fisher_rao_flow(obj, g0, 0.01, 10000, 100);
  REQUIRE(trace.size() == 101);
  CHECK(trace.back().time == doctest::Approx(100.0));

  SUBCASE("h = g0 means monotone descent") {
    const auto rep = gflow_certificate(obj, g0, g0, trace);
    CHECK(rep.kl == 0.0);
    CHECK(rep.monotone);
    CHECK(rep.holds);
  }
  SUBCASE("h near the optimum") {
    const auto scan = simplex_scan(3, 0.005, [&](const VectorXd& w) { return seq_nll(obj, w); });
    const VectorXd h = 0.99 * scan.weights + 0.01 * g0;
    const auto rep = gflow_certificate(obj, g0, h, trace);
    CHECK(rep.holds);
    CHECK(rep.monotone);
  }
  SUBCASE("zero atom in g0") {
    CHECK_THROWS_AS(gflow_certificate(obj, vec({0.5, 0.5, 0.0}), g0, trace), InvalidArgument);
  }
}

TEST_CASE("KL divergence") {
  CHECK(kl_divergence_weights(vec({0.5, 0.5}), vec({0.5, 0.5})) == 0.0);
  CHECK(std::isinf(kl_divergence_weights(vec({0.5, 0.5}), vec({1.0, 0.0}))));
  CHECK(kl_divergence_weights(vec({1.0, 0.0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("spline penalty") {
  const VectorXd grid = equispaced_grid(3.0, 61);
  const SplinePenalty pen(0.003, 61, 0.1);
  CHECK((pen.D() * VectorXd::Ones(61)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((pen.D() * grid).cwiseAbs().maxCoeff() <= 1e-10);
  Rng rng(6, 0);
  const VectorXd w = oracle::random_simplex(61, rng);
  const VectorXd fd = oracle::central_difference([&](const VectorXd& x) { return pen.value(x); }, w, 1e-6);
  CHECK((pen.gradient(w) - fd).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(SplinePenalty(0.0, 61, 0.1).value(w) == 0.0);
}
