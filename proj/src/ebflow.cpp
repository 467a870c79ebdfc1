#include "ebflow/ebflow.hpp"

#include <cmath>
#include <sstream>

#include "ebflow/errors.hpp"
#include "ebflow/inference.hpp"

namespace ebflow {

StepSchedule StepSchedule::constant(double eta_phi, double eta_w, int burn_in) {
  StepSchedule s;
  s.kind = Kind::constant;
  s.eta_phi = eta_phi;
  s.eta_w = eta_w;
  s.burn_in = burn_in;
  return s;
}

StepSchedule StepSchedule::loglinear(double start, double end, int horizon, double ratio, int burn_in) {
  StepSchedule s;
  s.kind = Kind::loglinear;
  s.eta_phi_start = start;
  s.eta_phi_end = end;
  s.horizon = horizon;
  s.ratio = ratio;
  s.burn_in = burn_in;
  return s;
}

double StepSchedule::eta_phi_at(std::int64_t t) const {
  if (t <= burn_in) return burn_in_eta_phi;
  if (kind == Kind::constant) return eta_phi;
  if (horizon <= 1) return eta_phi_start;
  const double frac = static_cast<double>(std::min<std::int64_t>(t, horizon) - 1) / (horizon - 1);
  return eta_phi_start * std::pow(eta_phi_end / eta_phi_start, frac);
}

double StepSchedule::eta_w_at(std::int64_t t) const {
  if (t <= burn_in) return 0.0;
  if (kind == Kind::constant) return eta_w;
  return ratio * eta_phi_at(t);
}

void StepSchedule::validate() const {
  if (burn_in < 0) throw InvalidArgument("schedule: burn_in must be >= 0");
  if (!(burn_in_eta_phi > 0.0)) throw InvalidArgument("schedule: burn-in step must be positive");
  if (kind == Kind::constant) {
    if (!(eta_phi > 0.0) || !(eta_w > 0.0)) throw InvalidArgument("schedule: step sizes must be positive");
    if (eta_w > 1.0) throw InvalidArgument("schedule: eta_w must be <= 1");
  } else {
    if (!(eta_phi_start > 0.0) || !(eta_phi_end > 0.0) || !(ratio > 0.0))
      throw InvalidArgument("schedule: step sizes must be positive");
    if (horizon < 1) throw InvalidArgument("schedule: horizon must be >= 1");
    if (ratio * std::max(eta_phi_start, eta_phi_end) > 1.0)
      throw InvalidArgument("schedule: eta_w must be <= 1 at every iteration");
  }
}

ChainState ula_step(const ReparamContext& ctx, const GridPrior& prior, ChainState state, double eta_phi,
                    bool precond) {
  if (!(eta_phi >= 0.0)) throw InvalidArgument("ula_step: eta_phi must be >= 0");
  if (state.phi.size() != ctx.p()) throw InvalidArgument("ula_step: phi has wrong length");
  if (!state.phi.allFinite()) throw NumericalError("ula_step: non-finite input iterate");
  const VectorXd grad = neg_log_posterior_grad(ctx, prior, state.phi);
  const VectorXd xi = state.rng.normal_vector(ctx.p());
  if (precond) {
    if (!ctx.precond) throw InvalidArgument("ula_step: context was built without a preconditioner");
    state.phi.noalias() -= eta_phi * (ctx.precond->q_inv * grad);
    state.phi.noalias() += std::sqrt(2.0 * eta_phi) * (ctx.precond->q_inv_sqrt * xi);
  } else {
    const double h = eta_phi / ctx.lambda_max_drift;
    state.phi -= h * grad;
    state.phi += std::sqrt(2.0 * h) * xi;
  }
  ++state.iter;
  if (!state.phi.allFinite()) {
    std::ostringstream msg;
    msg << "ULA iterate became non-finite at iteration " << state.iter
        << " (max |phi| = " << state.phi.cwiseAbs().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  return state;
}

WeightStepResult weight_step(const GridPrior& prior, const Eigen::Ref<const VectorXd>& phi, double tau,
                             double eta_w, const SplinePenalty* penalty) {
  if (!(eta_w > 0.0 && eta_w <= 1.0)) throw InvalidArgument("weight_step: eta_w must lie in (0, 1]");
  const SmoothedPriorEval eval = evaluate_smoothed_prior(prior, tau, phi, true);
  const VectorXd& w = prior.weights();
  VectorXd next = (1.0 - eta_w) * w + eta_w * eval.mean_responsibility;
  int clamped = 0;
  if (penalty != nullptr && penalty->lambda() > 0.0) {
    if (penalty->D().cols() != w.size()) throw InvalidArgument("weight_step: penalty grid mismatch");
    const VectorXd s = penalty->gradient(w);
    const double center = w.dot(s);
    next -= eta_w * w.cwiseProduct((s.array() - center).matrix());
    for (Index k = 0; k < next.size(); ++k) {
      if (next[k] < 0.0) {
        next[k] = 0.0;
        ++clamped;
      }
    }
  }
  if (!next.allFinite()) throw NumericalError("weight_step: non-finite weights");
  const double total = next.sum();
  if (!(total > 0.0)) throw NumericalError("weight_step: weights lost all mass");
  WeightStepResult out{prior.with_weights(next / total), clamped,
                       -eval.log_density.mean()};
  return out;
}

void sample_posterior_mean(const ReparamContext& ctx, ChainState& state, double eta_phi, bool precond,
                           std::int64_t post_iters, int thin, bool keep_samples, int autocorr_coords,
                           FitResult& result) {
  if (post_iters <= 0) return;
  if (thin < 1) throw InvalidArgument("thin must be >= 1");
  PosteriorMeanAccumulator acc(result.prior, ctx.tau(), ctx.p());
  const Index tracked = std::min<Index>(std::max(autocorr_coords, 0), ctx.p());
  std::vector<std::vector<double>> series(static_cast<std::size_t>(tracked));
  for (std::int64_t s = 1; s <= post_iters; ++s) {
    state = ula_step(ctx, result.prior, std::move(state), eta_phi, precond);
    if (s % thin != 0) continue;
    acc.add(state.phi);
    for (Index j = 0; j < tracked; ++j) series[static_cast<std::size_t>(j)].push_back(state.phi[j]);
    if (keep_samples) result.phi_samples.push_back(state.phi);
  }
  if (acc.count() > 0) {
    auto est = acc.estimate();
    result.theta_hat = std::move(est.theta_hat);
    result.posterior_samples = est.n_samples_used;
  }
  result.autocorr_lag1 = mean_lag_autocorrelation(series, 1);
  result.autocorr_lag10 = mean_lag_autocorrelation(series, 10);
}

FitResult fit_ebflow(const ReparamContext& ctx, const GridPrior& init_prior, const EbflowOptions& options,
                     Rng rng, const GridPrior* truth) {
  options.schedule.validate();
  if (!init_prior.strictly_positive())
    throw InvalidArgument("fit_ebflow: initial prior must be strictly positive on every atom");
  if (options.total_iters < 0) throw InvalidArgument("fit_ebflow: total_iters must be >= 0");
  if (options.trace_every < 1) throw InvalidArgument("fit_ebflow: trace_every must be >= 1");
  if (truth && !truth->same_grid(init_prior)) throw InvalidArgument("fit_ebflow: truth grid differs");
  if (options.precond && !ctx.precond)
    throw InvalidArgument("fit_ebflow: preconditioning requested but context has no preconditioner");
  const SplinePenalty* penalty = options.penalty ? &*options.penalty : nullptr;
  if (penalty && penalty->D().cols() != init_prior.size())
    throw InvalidArgument("fit_ebflow: penalty grid mismatch");

  FitResult result(options.precond ? "ebflow-precond" : "ebflow", init_prior);
  result.trace.reserve(static_cast<std::size_t>(options.total_iters));
  const double tau = ctx.tau();
  ChainState state{VectorXd::Zero(ctx.p()), 0, std::move(rng)};

  for (std::int64_t t = 1; t <= options.total_iters; ++t) {
    TraceRecord rec;
    rec.iter = t;
    rec.eta_phi = options.schedule.eta_phi_at(t);
    rec.eta_w = options.schedule.eta_w_at(t);
    state = ula_step(ctx, result.prior, std::move(state), rec.eta_phi, options.precond);
    if (rec.eta_w > 0.0) {
      auto ws = weight_step(result.prior, state.phi, tau, rec.eta_w, penalty);
      result.prior = std::move(ws.prior);
      rec.clamp_count = ws.clamped;
      result.total_clamps += ws.clamped;
    }
    if (t % options.trace_every == 0 || t == options.total_iters) {
      if (truth) rec.tv = tv_distance(result.prior, *truth);
      rec.seq_nll = -evaluate_smoothed_prior(result.prior, tau, state.phi).log_density.mean();
    }
    result.trace.push_back(rec);
  }

  const double final_eta = options.schedule.eta_phi_at(std::max<std::int64_t>(options.total_iters, 1));
  sample_posterior_mean(ctx, state, final_eta, options.precond, options.post_iters, options.thin,
                        options.keep_phi_samples, options.autocorr_coords, result);
  if (result.total_clamps > 0) {
    result.warnings.push_back("penalized weight update clamped " + std::to_string(result.total_clamps) +
                              " negative weights");
  }
  return result;
}

}  // namespace ebflow
