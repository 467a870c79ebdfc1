#include "ebflow/baselines.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ebflow/datagen.hpp"
#include "ebflow/errors.hpp"
#include "ebflow/inference.hpp"

namespace ebflow {

namespace {

const SplinePenalty* penalty_ptr(const std::optional<SplinePenalty>& penalty, const GridPrior& prior,
                                 const char* who) {
  if (!penalty) return nullptr;
  if (penalty->D().cols() != prior.size()) throw InvalidArgument(std::string(who) + ": penalty grid mismatch");
  return &*penalty;
}

// Softmax of the coordinate logits over the active atoms; inactive atoms get 0.
void coordinate_probabilities(const GridPrior& prior, double col_sq, double c, double sigma_sq,
                              Eigen::Ref<VectorXd> out) {
  const VectorXd& b = prior.support();
  const VectorXd& w = prior.weights();
  double top = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < b.size(); ++k) {
    if (w[k] <= 0.0) {
      out[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    out[k] = std::log(w[k]) - col_sq * b[k] * b[k] / (2.0 * sigma_sq) + c * b[k] / sigma_sq;
    top = std::max(top, out[k]);
  }
  double total = 0.0;
  for (Index k = 0; k < b.size(); ++k) {
    out[k] = w[k] > 0.0 ? std::exp(out[k] - top) : 0.0;
    total += out[k];
  }
  out /= total;
}

}  // namespace

MeanFieldState init_mean_field(const LinearModel& model, const GridPrior& prior) {
  model.validate();
  MeanFieldState s;
  s.q = prior.weights().transpose().replicate(model.p(), 1);
  s.mean = VectorXd::Constant(model.p(), prior.weights().dot(prior.support()));
  s.residual = model.y - model.X * s.mean;
  return s;
}

void cavi_coordinate_update(MeanFieldState& state, Index j, const GridPrior& prior, const LinearModel& model) {
  const auto xj = model.X.col(j);
  const double col_sq = xj.squaredNorm();
  const double c = xj.dot(state.residual) + col_sq * state.mean[j];
  VectorXd probs(prior.size());
  coordinate_probabilities(prior, col_sq, c, model.sigma_sq, probs);
  state.q.row(j) = probs.transpose();
  const double m_new = probs.dot(prior.support());
  state.residual -= (m_new - state.mean[j]) * xj;
  state.mean[j] = m_new;
}

void cavi_sweep(MeanFieldState& state, const GridPrior& prior, const LinearModel& model) {
  for (Index j = 0; j < model.p(); ++j) cavi_coordinate_update(state, j, prior, model);
}

GridPrior penalized_frequency_update(const VectorXd& frequencies, const GridPrior& current,
                                     const SplinePenalty* penalty, const SimplexSolveOptions& options,
                                     bool* converged) {
  if (frequencies.size() != current.size()) throw InvalidArgument("frequency update: size mismatch");
  VectorXd f = frequencies / frequencies.sum();
  if (penalty == nullptr || penalty->lambda() == 0.0) {
    if (converged) *converged = true;
    return current.with_weights(std::move(f));
  }
  auto data = [&f](const VectorXd& w, VectorXd* ratio) {
    double value = 0.0;
    for (Index k = 0; k < w.size(); ++k) {
      if (f[k] <= 0.0) {
        if (ratio) (*ratio)[k] = 0.0;
        continue;
      }
      if (w[k] <= 0.0) return std::numeric_limits<double>::infinity();
      value -= f[k] * std::log(w[k]);
      if (ratio) (*ratio)[k] = f[k] / w[k];
    }
    return value;
  };
  VectorXd init = current.strictly_positive() ? current.weights()
                                              : VectorXd::Constant(current.size(), 1.0 / current.size());
  const auto solved = minimize_on_simplex(data, penalty, std::move(init), options);
  if (converged) *converged = solved.converged;
  return current.with_weights(solved.weights);
}

GridPrior cavi_prior_update(const MeanFieldState& state, const GridPrior& current, const SplinePenalty* penalty,
                            const SimplexSolveOptions& options, bool* converged) {
  const VectorXd avg = state.q.colwise().mean().transpose();
  return penalized_frequency_update(avg, current, penalty, options, converged);
}

double cavi_objective(const MeanFieldState& state, const GridPrior& prior, const LinearModel& model) {
  const VectorXd& b = prior.support();
  const VectorXd& w = prior.weights();
  double quad = (model.y - model.X * state.mean).squaredNorm();
  double cross_entropy = 0.0;
  double neg_entropy = 0.0;
  for (Index j = 0; j < model.p(); ++j) {
    double second = 0.0;
    for (Index k = 0; k < b.size(); ++k) {
      const double qjk = state.q(j, k);
      if (qjk <= 0.0) continue;
      if (w[k] <= 0.0) return std::numeric_limits<double>::infinity();
      second += qjk * b[k] * b[k];
      cross_entropy -= qjk * std::log(w[k]);
      neg_entropy += qjk * std::log(qjk);
    }
    const double var = std::max(second - state.mean[j] * state.mean[j], 0.0);
    quad += model.X.col(j).squaredNorm() * var;
  }
  return (quad / (2.0 * model.sigma_sq) + cross_entropy + neg_entropy) / static_cast<double>(model.p());
}

double residual_drift(const VectorXd& cached, const LinearModel& model, const VectorXd& theta) {
  return (cached - (model.y - model.X * theta)).cwiseAbs().maxCoeff();
}

FitResult fit_cavi(const LinearModel& model, const GridPrior& init_prior, const CaviOptions& options,
                   const GridPrior* truth, MeanFieldState* final_state) {
  if (options.iterations < 0) throw InvalidArgument("fit_cavi: iterations must be >= 0");
  if (options.trace_every < 1) throw InvalidArgument("fit_cavi: trace_every must be >= 1");
  if (truth && !truth->same_grid(init_prior)) throw InvalidArgument("fit_cavi: truth grid differs");
  const SplinePenalty* penalty = penalty_ptr(options.penalty, init_prior, "fit_cavi");

  FitResult result("cavi", init_prior);
  MeanFieldState state = init_mean_field(model, init_prior);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::int64_t unconverged = 0;
  for (std::int64_t t = 1; t <= options.iterations; ++t) {
    cavi_sweep(state, result.prior, model);
    bool ok = true;
    result.prior = cavi_prior_update(state, result.prior, penalty, options.solver, &ok);
    if (!ok) ++unconverged;
    TraceRecord rec;
    rec.iter = t;
    rec.eta_phi = nan;
    rec.eta_w = nan;
    if (t % options.trace_every == 0 || t == options.iterations) {
      if (truth) rec.tv = tv_distance(result.prior, *truth);
      rec.seq_nll = cavi_objective(state, result.prior, model);
    }
    result.trace.push_back(rec);
  }
  result.theta_hat = state.q * init_prior.support();
  result.posterior_samples = 1;
  if (unconverged > 0)
    result.warnings.push_back("prior update hit max_iter in " + std::to_string(unconverged) + " iterations");
  if (final_state) *final_state = std::move(state);
  return result;
}

GibbsState make_gibbs_state(const LinearModel& model, const GridPrior& prior, std::vector<int> atoms) {
  model.validate();
  if (static_cast<Index>(atoms.size()) != model.p()) throw InvalidArgument("gibbs: configuration has wrong length");
  GibbsState s;
  s.theta.resize(model.p());
  for (Index j = 0; j < model.p(); ++j) {
    const int a = atoms[static_cast<std::size_t>(j)];
    if (a < 0 || a >= prior.size()) throw InvalidArgument("gibbs: atom index out of range");
    s.theta[j] = prior.support()[a];
  }
  s.atom = std::move(atoms);
  s.residual = model.y - model.X * s.theta;
  s.counts.setZero(model.p(), prior.size());
  return s;
}

GibbsState init_gibbs(const LinearModel& model, const GridPrior& prior) {
  Index nearest = 0;
  prior.support().cwiseAbs().minCoeff(&nearest);
  return make_gibbs_state(model, prior, std::vector<int>(static_cast<std::size_t>(model.p()),
                                                         static_cast<int>(nearest)));
}

VectorXd gibbs_conditional(const GibbsState& state, Index j, const GridPrior& prior, const LinearModel& model) {
  const auto xj = model.X.col(j);
  const double col_sq = xj.squaredNorm();
  const double c = xj.dot(state.residual) + col_sq * state.theta[j];
  VectorXd probs(prior.size());
  coordinate_probabilities(prior, col_sq, c, model.sigma_sq, probs);
  return probs;
}

void gibbs_sweep(GibbsState& state, const GridPrior& prior, const LinearModel& model, Rng& rng, bool tally) {
  for (Index j = 0; j < model.p(); ++j) {
    const VectorXd probs = gibbs_conditional(state, j, prior, model);
    const Index k = sample_atom(probs, rng);
    const double value = prior.support()[k];
    state.residual -= (value - state.theta[j]) * model.X.col(j);
    state.theta[j] = value;
    state.atom[static_cast<std::size_t>(j)] = static_cast<int>(k);
    if (tally) ++state.counts(j, k);
  }
}

FitResult fit_gibbs_mcem(const LinearModel& model, const GridPrior& init_prior, const GibbsMcemOptions& options,
                         Rng rng, const GridPrior* truth) {
  if (options.t_iter < 1) throw InvalidArgument("fit_gibbs_mcem: t_iter must be >= 1");
  if (options.burn_in < 0 || options.total_iters < 0) throw InvalidArgument("fit_gibbs_mcem: negative length");
  if (options.trace_every < 1) throw InvalidArgument("fit_gibbs_mcem: trace_every must be >= 1");
  if (truth && !truth->same_grid(init_prior)) throw InvalidArgument("fit_gibbs_mcem: truth grid differs");
  const SplinePenalty* penalty = penalty_ptr(options.penalty, init_prior, "fit_gibbs_mcem");

  FitResult result("gibbs-mcem", init_prior);
  GibbsState state = init_gibbs(model, init_prior);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t t = 1; t <= options.total_iters; ++t) {
    const bool sampling = t > options.burn_in;
    gibbs_sweep(state, result.prior, model, rng, sampling);
    TraceRecord rec;
    rec.iter = t;
    rec.eta_phi = nan;
    rec.eta_w = nan;
    if (sampling && (t - options.burn_in) % options.t_iter == 0) {
      const VectorXd freq = state.counts.colwise().sum().transpose().cast<double>();
      result.prior = penalized_frequency_update(freq, result.prior, penalty, options.solver);
      state.counts.setZero();
    }
    if (truth && (t % options.trace_every == 0 || t == options.total_iters))
      rec.tv = tv_distance(result.prior, *truth);
    result.trace.push_back(rec);
  }
  if (options.post_iters > 0) {
    PosteriorMeanAccumulator acc(result.prior, 1.0, model.p());
    for (std::int64_t s = 0; s < options.post_iters; ++s) {
      gibbs_sweep(state, result.prior, model, rng, false);
      acc.add_theta(state.theta);
    }
    auto est = acc.estimate();
    result.theta_hat = std::move(est.theta_hat);
    result.posterior_samples = est.n_samples_used;
  }
  return result;
}

VectorXd subsample_pool(const std::vector<double>& pool, std::int64_t size, Rng& rng) {
  const auto n = pool.size();
  if (size <= 0) throw InvalidArgument("subsample size must be positive");
  if (static_cast<std::size_t>(size) >= n) return Eigen::Map<const VectorXd>(pool.data(), static_cast<Index>(n));
  // Partial Fisher-Yates over an index permutation.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  VectorXd out(size);
  for (std::int64_t i = 0; i < size; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const std::size_t pick = u + rng.uniform_index(n - u);
    std::swap(idx[u], idx[pick]);
    out[i] = pool[idx[u]];
  }
  return out;
}

FitResult fit_langevin_mcem(const ReparamContext& ctx, const GridPrior& init_prior,
                            const LangevinMcemOptions& options, Rng rng, const GridPrior* truth) {
  if (options.t_iter < 1) throw InvalidArgument("fit_langevin_mcem: t_iter must be >= 1");
  if (options.burn_in < 0 || options.total_iters < 0) throw InvalidArgument("fit_langevin_mcem: negative length");
  if (!(options.eta_phi > 0.0) || !(options.burn_in_eta_phi > 0.0))
    throw InvalidArgument("fit_langevin_mcem: step sizes must be positive");
  if (options.trace_every < 1) throw InvalidArgument("fit_langevin_mcem: trace_every must be >= 1");
  if (truth && !truth->same_grid(init_prior)) throw InvalidArgument("fit_langevin_mcem: truth grid differs");
  const SplinePenalty* penalty = penalty_ptr(options.penalty, init_prior, "fit_langevin_mcem");

  FitResult result("langevin-mcem", init_prior);
  const double tau = ctx.tau();
  Rng subsample_rng = rng.split(rng.stream() + 1);
  ChainState state{VectorXd::Zero(ctx.p()), 0, std::move(rng)};
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(ctx.p()) * static_cast<std::size_t>(options.t_iter));
  std::int64_t unconverged = 0;

  for (std::int64_t t = 1; t <= options.total_iters; ++t) {
    const bool sampling = t > options.burn_in;
    TraceRecord rec;
    rec.iter = t;
    rec.eta_phi = sampling ? options.eta_phi : options.burn_in_eta_phi;
    state = ula_step(ctx, result.prior, std::move(state), rec.eta_phi);
    if (sampling) {
      pool.insert(pool.end(), state.phi.data(), state.phi.data() + state.phi.size());
      if ((t - options.burn_in) % options.t_iter == 0) {
        const SeqObjective obj(subsample_pool(pool, options.subsample, subsample_rng), tau,
                               init_prior.support());
        VectorXd warm = result.prior.strictly_positive() ? result.prior.weights() : VectorXd();
        const auto sol = solve_seq_npmle(obj, penalty, options.solver, std::move(warm));
        if (!sol.converged) ++unconverged;
        result.prior = result.prior.with_weights(sol.weights);
        pool.clear();
      }
    }
    if (t % options.trace_every == 0 || t == options.total_iters) {
      if (truth) rec.tv = tv_distance(result.prior, *truth);
      rec.seq_nll = -evaluate_smoothed_prior(result.prior, tau, state.phi).log_density.mean();
    }
    result.trace.push_back(rec);
  }
  const double final_eta = options.total_iters > options.burn_in ? options.eta_phi : options.burn_in_eta_phi;
  sample_posterior_mean(ctx, state, final_eta, false, options.post_iters, options.thin, false,
                        options.autocorr_coords, result);
  if (unconverged > 0)
    result.warnings.push_back("M-step hit max_iter in " + std::to_string(unconverged) + " of the updates");
  return result;
}

}  // namespace ebflow
