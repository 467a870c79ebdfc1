#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ebflow/model.hpp"
#include "ebflow/spline.hpp"

namespace ebflow {

/// Gaussian sequence-model likelihood on a fixed grid:
/// obs_i = theta_i + N(0, tau^2), theta_i ~ sum_k w_k delta_{b_k}.
///
/// Caches the log-kernel log L[i,k] = log N_tau(obs_i - b_k) and a
/// row-rescaled copy exp(log L[i,k] - max_k log L[i,k]) used for the
/// fast linear-space path; rows whose mixture underflows there are
/// recomputed in log-space.
class SeqObjective {
 public:
  SeqObjective(VectorXd obs, double tau, VectorXd grid);

  const VectorXd& obs() const { return obs_; }
  double tau() const { return tau_; }
  const VectorXd& grid() const { return grid_; }
  const MatrixXd& log_kernel() const { return log_kernel_; }
  Index m() const { return obs_.size(); }
  Index K() const { return grid_.size(); }

  struct Evaluation {
    double nll = 0.0;  // -(1/m) sum_i log sum_k w_k L[i,k]
    /// (1/m) sum_i w_k L[i,k] / sum_j w_j L[i,j]; sums to one.
    VectorXd responsibility;
    bool finite = true;
  };

  Evaluation evaluate(const VectorXd& w, bool with_responsibility = true) const;

 private:
  double log_space_row(Index i, const VectorXd& w, VectorXd* resp_accum) const;

  VectorXd obs_;
  double tau_;
  VectorXd grid_;
  MatrixXd log_kernel_;
  MatrixXd scaled_kernel_;
  VectorXd row_max_;
};

/// Marginal negative log-likelihood; +inf if w carries no mass.
double seq_nll(const SeqObjective& obj, const VectorXd& w);

/// One Fisher-Rao step of size eta_w in (0, 1]:
///   w'_k = w_k + eta w_k [(1/m) sum_i L[i,k] / sum_j w_j L[i,j] - 1],
/// evaluated as the convex combination (1 - eta) w + eta * responsibility so
/// nonnegativity is exact. eta_w = 1 is one EM step.
VectorXd fisher_rao_step(const SeqObjective& obj, const VectorXd& w, double eta_w);

struct SimplexSolveOptions {
  double tol = 1e-10;   // relative objective decrease over `window` iterations
  int max_iter = 20000;
  int window = 50;
};

struct SimplexSolveResult {
  VectorXd weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Smooth data term on the simplex. Returns the value at w and, when `ratio`
/// is non-null, fills ratio_k = -d(value)/d(w_k).
using SimplexDataTerm = std::function<double(const VectorXd& w, VectorXd* ratio)>;

/// Minimizes data(w) + penalty(w) over the simplex by multiplicative
/// (Fisher-Rao / mirror) steps
///   w'_k = w_k [1 + eta (r_k - s_k - sum_i w_i (r_i - s_i))],
/// r = ratio, s = penalty gradient, with eta backtracked from 1 until the
/// step stays nonnegative and does not increase the objective. Without a
/// penalty and with sum_k w_k r_k = 1 the eta = 1 step is the EM update.
SimplexSolveResult minimize_on_simplex(const SimplexDataTerm& data, const SplinePenalty* penalty,
                                       VectorXd init, const SimplexSolveOptions& options = {});

struct NpmleSolution {
  VectorXd weights;
  double nll = 0.0;
  double objective = 0.0;  // nll + penalty
  int iterations = 0;
  bool converged = false;  // false: max_iter hit, weights are best-so-far
};

/// Sequence-model NPMLE on the fixed grid (optionally spline-penalized),
/// starting from `init` (uniform when empty).
NpmleSolution solve_seq_npmle(const SeqObjective& obj, const SplinePenalty* penalty = nullptr,
                              const SimplexSolveOptions& options = {}, VectorXd init = {});

struct ScanResult {
  VectorXd weights;
  double value = 0.0;
};

/// Exhaustive scan of the simplex on a lattice of the given resolution.
/// Only K <= 3 is supported.
ScanResult simplex_scan(int K, double resolution, const std::function<double(const VectorXd&)>& f);

/// D_KL(h || g) = sum_k h_k log(h_k / g_k); +inf when h is not absolutely
/// continuous with respect to g.
double kl_divergence_weights(const VectorXd& h, const VectorXd& g);

struct FlowRecord {
  double time = 0.0;
  double objective = 0.0;
};

/// Small-step Fisher-Rao flow from g0 with time increment dt, recording the
/// sequence-model NLL every `record_every` steps (time 0 included).
std::vector<FlowRecord> run_fisher_rao_flow(const SeqObjective& obj, const VectorXd& g0, double dt,
                                            int steps, int record_every = 1);

struct CertificateReport {
  bool holds = false;        // gap bound at every recorded t > 0
  bool monotone = false;     // objective non-increasing along the trace
  double kl = 0.0;           // D_KL(h || g0)
  double reference = 0.0;    // NLL at h
  double worst_margin = 0.0; // min over t of slack * kl / t - gap
};

/// Checks F(g_t) - F(h) <= slack * D_KL(h || g0) / t along a recorded flow.
/// Throws InvalidArgument when g0 has a zero atom or the KL is infinite.
CertificateReport gflow_certificate(const SeqObjective& obj, const VectorXd& g0, const VectorXd& h,
                                    std::span<const FlowRecord> trace, double slack = 1.1);

}  // namespace ebflow
