#include "ebflow/seqnpmle.hpp"

#include <cmath>
#include <limits>

#include "ebflow/errors.hpp"

namespace ebflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this the rescaled linear-space mixture is recomputed in log-space.
constexpr double kUnderflowGuard = 1e-280;

void check_simplex(const VectorXd& w, Index K, const char* who) {
  if (w.size() != K) throw InvalidArgument(std::string(who) + ": weight vector has wrong length");
  if (!w.allFinite() || (w.array() < 0.0).any())
    throw InvalidArgument(std::string(who) + ": weights must be finite and nonnegative");
}

}  // namespace

SeqObjective::SeqObjective(VectorXd obs, double tau, VectorXd grid)
    : obs_(std::move(obs)), tau_(tau), grid_(std::move(grid)) {
  if (obs_.size() < 1) throw InvalidArgument("SeqObjective needs at least one observation");
  if (grid_.size() < 1) throw InvalidArgument("SeqObjective needs a nonempty grid");
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw InvalidArgument("SeqObjective: tau must be positive");
  if (!obs_.allFinite()) throw InvalidArgument("SeqObjective: non-finite observation");
  const Index m = obs_.size();
  const Index K = grid_.size();
  log_kernel_.resize(m, K);
  const double log_norm = log_normal_pdf(0.0, tau_);
  const double inv_two_tau_sq = 0.5 / (tau_ * tau_);
  for (Index k = 0; k < K; ++k)
    log_kernel_.col(k) = (log_norm - (obs_.array() - grid_[k]).square() * inv_two_tau_sq).matrix();
  row_max_ = log_kernel_.rowwise().maxCoeff();
  scaled_kernel_ = (log_kernel_.colwise() - row_max_).array().exp().matrix();
}

double SeqObjective::log_space_row(Index i, const VectorXd& w, VectorXd* resp_accum) const {
  double mx = -kInf;
  for (Index k = 0; k < w.size(); ++k)
    if (w[k] > 0.0) mx = std::max(mx, std::log(w[k]) + log_kernel_(i, k));
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (Index k = 0; k < w.size(); ++k)
    if (w[k] > 0.0) s += std::exp(std::log(w[k]) + log_kernel_(i, k) - mx);
  if (resp_accum) {
    for (Index k = 0; k < w.size(); ++k)
      if (w[k] > 0.0) (*resp_accum)[k] += std::exp(std::log(w[k]) + log_kernel_(i, k) - mx) / s;
  }
  return mx + std::log(s);
}

SeqObjective::Evaluation SeqObjective::evaluate(const VectorXd& w, bool with_responsibility) const {
  check_simplex(w, K(), "SeqObjective::evaluate");
  Evaluation out;
  const Index m = obs_.size();
  if (!(w.sum() > 0.0)) {
    out.nll = kInf;
    out.finite = false;
    if (with_responsibility) out.responsibility = VectorXd::Zero(K());
    return out;
  }
  const VectorXd mix = scaled_kernel_ * w;
  VectorXd inv_mix = VectorXd::Zero(m);
  VectorXd fallback_resp;
  if (with_responsibility) fallback_resp = VectorXd::Zero(K());
  double log_lik = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (mix[i] > kUnderflowGuard) {
      log_lik += row_max_[i] + std::log(mix[i]);
      inv_mix[i] = 1.0 / mix[i];
    } else {
      log_lik += log_space_row(i, w, with_responsibility ? &fallback_resp : nullptr);
    }
  }
  out.nll = -log_lik / static_cast<double>(m);
  out.finite = std::isfinite(out.nll);
  if (with_responsibility) {
    VectorXd resp = (scaled_kernel_.transpose() * inv_mix).cwiseProduct(w);
    resp += fallback_resp;
    out.responsibility = resp / static_cast<double>(m);
  }
  return out;
}

double seq_nll(const SeqObjective& obj, const VectorXd& w) {
  return obj.evaluate(w, false).nll;
}

VectorXd fisher_rao_step(const SeqObjective& obj, const VectorXd& w, double eta_w) {
  if (!(eta_w > 0.0 && eta_w <= 1.0)) throw InvalidArgument("fisher_rao_step: eta_w must lie in (0, 1]");
  const auto eval = obj.evaluate(w, true);
  if (!eval.finite) throw NumericalError("fisher_rao_step: mixture vanishes");
  VectorXd next = (1.0 - eta_w) * w + eta_w * eval.responsibility;
  if (!next.allFinite()) throw NumericalError("fisher_rao_step: non-finite weights");
  return next / next.sum();
}

SimplexSolveResult minimize_on_simplex(const SimplexDataTerm& data, const SplinePenalty* penalty,
                                       VectorXd init, const SimplexSolveOptions& options) {
  const bool penalized = penalty != nullptr && penalty->lambda() > 0.0;
  auto objective = [&](const VectorXd& w, VectorXd* ratio) {
    double f = data(w, ratio);
    if (penalized) f += penalty->value(w);
    return f;
  };

  SimplexSolveResult result;
  VectorXd w = std::move(init);
  w /= w.sum();
  VectorXd ratio(w.size());
  double f = objective(w, &ratio);
  if (!std::isfinite(f)) throw NumericalError("minimize_on_simplex: objective not finite at start");

  std::vector<double> history{f};
  double eta = 1.0;
  const double eps = std::numeric_limits<double>::epsilon();
  VectorXd candidate(w.size());
  VectorXd next_ratio(w.size());
  int it = 0;
  for (; it < options.max_iter; ++it) {
    VectorXd direction = ratio;
    if (penalized) direction -= penalty->gradient(w);
    const double center = w.dot(direction);

    eta = std::min(1.0, 2.0 * eta);
    bool accepted = false;
    double f_next = f;
    while (eta >= 1e-14) {
      if (penalized) {
        candidate = w.cwiseProduct((1.0 + eta * (direction.array() - center)).matrix());
      } else {
        // Exactly nonnegative convex-combination form.
        candidate = (1.0 - eta) * w + eta * w.cwiseProduct(ratio) / center;
      }
      if ((candidate.array() >= 0.0).all()) {
        candidate /= candidate.sum();
        f_next = objective(candidate, &next_ratio);
        if (std::isfinite(f_next) && f_next <= f + 8.0 * eps * std::abs(f)) {
          accepted = true;
          break;
        }
      }
      eta *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      result.converged = true;
      break;
    }
    w.swap(candidate);
    ratio.swap(next_ratio);
    f = f_next;
    history.push_back(f);
    const auto t = history.size() - 1;
    if (t >= static_cast<std::size_t>(options.window)) {
      const double old = history[t - static_cast<std::size_t>(options.window)];
      const double scale = std::max(std::abs(f), std::numeric_limits<double>::min());
      if ((old - f) / scale < options.tol) {
        result.converged = true;
        ++it;
        break;
      }
    }
  }
  result.weights = std::move(w);
  result.objective = f;
  result.iterations = it;
  return result;
}

NpmleSolution solve_seq_npmle(const SeqObjective& obj, const SplinePenalty* penalty,
                              const SimplexSolveOptions& options, VectorXd init) {
  if (!(options.tol > 0.0)) throw InvalidArgument("solve_seq_npmle: tol must be positive");
  const Index K = obj.K();
  if (init.size() == 0) init = VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  check_simplex(init, K, "solve_seq_npmle");
  if (penalty && penalty->D().cols() != K) throw InvalidArgument("solve_seq_npmle: penalty grid mismatch");

  auto data = [&obj](const VectorXd& w, VectorXd* ratio) {
    auto eval = obj.evaluate(w, ratio != nullptr);
    if (ratio) {
      // r_k = resp_k / w_k; inactive atoms stay absorbed at zero.
      *ratio = VectorXd::Zero(w.size());
      for (Index k = 0; k < w.size(); ++k)
        if (w[k] > 0.0) (*ratio)[k] = eval.responsibility[k] / w[k];
    }
    return eval.nll;
  };
  const auto solved = minimize_on_simplex(data, penalty, std::move(init), options);
  NpmleSolution out;
  out.weights = solved.weights;
  out.nll = seq_nll(obj, solved.weights);
  out.objective = solved.objective;
  out.iterations = solved.iterations;
  out.converged = solved.converged;
  return out;
}

ScanResult simplex_scan(int K, double resolution, const std::function<double(const VectorXd&)>& f) {
  if (K < 1 || K > 3) throw InvalidArgument("simplex_scan supports K <= 3 only");
  if (!(resolution > 0.0 && resolution <= 1.0)) throw InvalidArgument("simplex_scan: bad resolution");
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  ScanResult best;
  best.value = kInf;
  VectorXd w(K);
  auto consider = [&]() {
    const double v = f(w);
    if (v < best.value) {
      best.value = v;
      best.weights = w;
    }
  };
  if (K == 1) {
    w[0] = 1.0;
    consider();
  } else if (K == 2) {
    for (int i = 0; i <= steps; ++i) {
      w[0] = static_cast<double>(i) / steps;
      w[1] = 1.0 - w[0];
      consider();
    }
  } else {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        w[0] = static_cast<double>(i) / steps;
        w[1] = static_cast<double>(j) / steps;
        w[2] = static_cast<double>(steps - i - j) / steps;
        consider();
      }
    }
  }
  return best;
}

double kl_divergence_weights(const VectorXd& h, const VectorXd& g) {
  if (h.size() != g.size()) throw InvalidArgument("kl: size mismatch");
  double kl = 0.0;
  for (Index k = 0; k < h.size(); ++k) {
    if (h[k] <= 0.0) continue;
    if (g[k] <= 0.0) return kInf;
    kl += h[k] * std::log(h[k] / g[k]);
  }
  return kl;
}

std::vector<FlowRecord> run_fisher_rao_flow(const SeqObjective& obj, const VectorXd& g0, double dt,
                                            int steps, int record_every) {
  if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
  std::vector<FlowRecord> trace;
  VectorXd w = g0;
  trace.push_back({0.0, seq_nll(obj, w)});
  for (int s = 1; s <= steps; ++s) {
    w = fisher_rao_step(obj, w, dt);
    if (s % record_every == 0 || s == steps) trace.push_back({s * dt, seq_nll(obj, w)});
  }
  return trace;
}

CertificateReport gflow_certificate(const SeqObjective& obj, const VectorXd& g0, const VectorXd& h,
                                    std::span<const FlowRecord> trace, double slack) {
  if (!(g0.array() > 0.0).all()) throw InvalidArgument("gflow_certificate: g0 must be strictly positive");
  CertificateReport report;
  report.kl = kl_divergence_weights(h, g0);
  if (!std::isfinite(report.kl)) throw InvalidArgument("gflow_certificate: D_KL(h || g0) is infinite");
  report.reference = seq_nll(obj, h);
  constexpr double kRoundoff = 1e-12;
  report.holds = true;
  report.monotone = true;
  report.worst_margin = kInf;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i > 0 && trace[i].objective > trace[i - 1].objective + kRoundoff) report.monotone = false;
    if (trace[i].time <= 0.0) continue;
    const double gap = trace[i].objective - report.reference;
    const double margin = slack * report.kl / trace[i].time - gap;
    report.worst_margin = std::min(report.worst_margin, margin);
    if (margin < -kRoundoff) report.holds = false;
  }
  return report;
}

}  // namespace ebflow
