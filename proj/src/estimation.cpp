#include "lbmpc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbmpc {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// One NLL term; non-finite log-densities and diverged regenerated states
// surface as the clamp penalty.
double nll_term_theta(const Scenario& scn, const VectorXd& x, const VectorXd& u,
                      const VectorXd& theta, double r, int t, const EstimationOptions& opts,
                      bool& clamped) {
  if (!x.allFinite() || x.norm() > opts.state_guard) {
    clamped = true;
    return opts.nll_clamp;
  }
  const double ld = scn.reward.log_density_at(r, x, u, theta, t);
  if (!std::isfinite(ld) || -ld >= opts.nll_clamp) {
    clamped = true;
    return opts.nll_clamp;
  }
  return -ld;
}

// Allocation-free trajectory NLL for scalar gaussian scenarios. Terms fold
// in time order, matching the generic path bit for bit on shared formulas.
struct ScalarNll {
  bool ok = false;
  double a = 0.0, b = 0.0, sigma = 1.0, log_norm = 0.0;
  const Scenario* scn = nullptr;
  const EstimationOptions* opts = nullptr;

  ScalarNll(const Scenario& s, const EstimationOptions& o) : scn(&s), opts(&o) {
    ok = s.scalar_fast_path() && s.reward.family == RewardModel::Family::kGaussian &&
         s.reward.sigma > 0.0;
    if (ok) {
      a = s.A(0, 0);
      b = s.B(0, 0);
      sigma = s.reward.sigma;
      log_norm = std::log(sigma) + kLogSqrt2Pi;
    }
  }

  template <typename InputAt, typename RewardAt>
  double evaluate(double x0, InputAt input_at, RewardAt reward_at, int count,
                  const VectorXd& theta, bool* clamped_out = nullptr) const {
    const auto& g1 = scn->residual.g1;
    const auto& h1 = scn->reward.h1;
    bool clamped = false;
    double total = 0.0;
    double x = x0;
    for (int i = 0; i < count; ++i) {
      const double u = input_at(i);
      if (!std::isfinite(x) || std::abs(x) > opts->state_guard) {
        clamped = true;
        total = opts->nll_clamp;
        break;
      }
      const double z = (reward_at(i) - h1(x, u, theta, i)) / sigma;
      const double term = 0.5 * z * z + log_norm;
      if (!std::isfinite(term) || term + total >= opts->nll_clamp) {
        clamped = true;
        total = opts->nll_clamp;
        break;
      }
      total += term;
      x = a * x + b * u + g1(x, u, theta, i);
    }
    if (clamped_out) *clamped_out = clamped;
    return total;
  }
};

}  // namespace

NllValue neg_log_likelihood_full(const Scenario& scn, const History& hist, const VectorXd& theta,
                                 int t_limit, const EstimationOptions& opts) {
  if (hist.states.empty() || hist.inputs.empty()) {
    throw ContractError("neg_log_likelihood: empty history");
  }
  if (!scn.Theta.contains(theta, 1e-9)) {
    throw ContractError("neg_log_likelihood: theta outside Theta");
  }
  const int T = t_limit < 0 ? hist.steps() : std::min(t_limit, hist.steps());
  NllValue out;
  const ScalarNll fast(scn, opts);
  if (fast.ok) {
    out.value = fast.evaluate(
        hist.states[0](0), [&](int i) { return hist.inputs[i](0); },
        [&](int i) { return hist.rewards[i]; }, T, theta, &out.clamped);
    return out;
  }
  VectorXd x = hist.states[0];
  for (int i = 0; i < T; ++i) {
    out.value += nll_term_theta(scn, x, hist.inputs[i], theta, hist.rewards[i], i, opts,
                                out.clamped);
    if (out.value >= opts.nll_clamp) {
      out.value = opts.nll_clamp;
      out.clamped = true;
      break;
    }
    x = scn.A * x + scn.B * hist.inputs[i] + scn.residual.g(x, hist.inputs[i], theta, i);
  }
  return out;
}

double neg_log_likelihood(const Scenario& scn, const History& hist, const VectorXd& theta,
                          int t_limit) {
  return neg_log_likelihood_full(scn, hist, theta, t_limit).value;
}

double empirical_log_ratio_objective(const Scenario& scn, const History& hist,
                                     const VectorXd& theta, int t_limit) {
  const int T = t_limit < 0 ? hist.steps() : std::min(t_limit, hist.steps());
  if (T < 2) throw ContractError("empirical_log_ratio_objective: need at least 2 rewards");
  double sum = 0.0;
  VectorXd xa = hist.states[0];  // trajectory under theta_true
  VectorXd xb = hist.states[0];  // trajectory under theta
  for (int i = 0; i < T; ++i) {
    const VectorXd& u = hist.inputs[i];
    sum += scn.reward.log_density_at(hist.rewards[i], xa, u, scn.theta_true, i) -
           scn.reward.log_density_at(hist.rewards[i], xb, u, theta, i);
    xa = scn.A * xa + scn.B * u + scn.residual.g(xa, u, scn.theta_true, i);
    xb = scn.A * xb + scn.B * u + scn.residual.g(xb, u, theta, i);
  }
  return sum / static_cast<double>(T - 1);
}

std::vector<VectorXd> parameter_grid(const HPolytope& box, int grid_per_dim) {
  if (!box.is_box()) throw ContractError("parameter_grid: Theta must be a box");
  const int p = box.dim();
  if (p > 4) throw UnsupportedError("parameter_grid: p <= 4 supported");
  std::vector<std::vector<double>> axes(p);
  for (int d = 0; d < p; ++d) {
    const double lo = box.box_lo()(d), hi = box.box_hi()(d);
    if (hi - lo <= 0.0) {
      axes[d] = {lo};
    } else {
      for (int i = 0; i < grid_per_dim; ++i) {
        axes[d].push_back(lo + (hi - lo) * static_cast<double>(i) / (grid_per_dim - 1));
      }
    }
  }
  std::vector<VectorXd> grid;
  std::vector<int> idx(p, 0);
  for (;;) {
    VectorXd th(p);
    for (int d = 0; d < p; ++d) th(d) = axes[d][idx[d]];
    grid.push_back(th);
    int d = 0;
    while (d < p && ++idx[d] == static_cast<int>(axes[d].size())) {
      idx[d] = 0;
      ++d;
    }
    if (d == p) break;
  }
  return grid;
}

namespace {

VectorXd project_to_box(const HPolytope& box, const VectorXd& th) {
  return th.cwiseMax(box.box_lo()).cwiseMin(box.box_hi());
}

// Compass direct search: probe +-step along each axis, move to the best
// improving probe, halve the step when nothing improves.
std::pair<VectorXd, double> compass_search(
    const std::function<double(const VectorXd&)>& f, const HPolytope& box, VectorXd cur,
    double f_cur, const EstimationOptions& opts, int& iterations) {
  const int p = static_cast<int>(cur.size());
  VectorXd step(p);
  for (int d = 0; d < p; ++d) {
    const double width = box.box_hi()(d) - box.box_lo()(d);
    step(d) = width > 0 ? width / std::max(1, opts.grid_per_dim - 1) : 0.0;
  }
  iterations = 0;
  for (int it = 0; it < opts.refine_max_iterations; ++it) {
    ++iterations;
    bool improved = false;
    VectorXd best = cur;
    double f_best = f_cur;
    for (int d = 0; d < p; ++d) {
      if (step(d) <= 0.0) continue;
      for (double s : {1.0, -1.0}) {
        VectorXd probe = cur;
        probe(d) = std::clamp(probe(d) + s * step(d), box.box_lo()(d), box.box_hi()(d));
        if (probe(d) == cur(d)) continue;
        const double fp = f(probe);
        if (fp < f_best - 1e-15) {
          f_best = fp;
          best = probe;
          improved = true;
        }
      }
    }
    if (improved) {
      cur = best;
      f_cur = f_best;
      continue;
    }
    step *= 0.5;
    if (step.maxCoeff() < opts.refine_step_floor) break;
  }
  return {cur, f_cur};
}

}  // namespace

ParameterEstimate mle_fit(const Scenario& scn, const History& hist,
                          const std::optional<ParameterEstimate>& prev,
                          const EstimationOptions& opts, int t_limit) {
  const int T = t_limit < 0 ? hist.steps() : std::min(t_limit, hist.steps());
  if (T < 2) throw ContractError("mle_fit: need at least 2 recorded rewards");

  auto nll_of = [&](const VectorXd& th) {
    return neg_log_likelihood_full(scn, hist, th, T, opts).value;
  };

  const auto grid = parameter_grid(scn.Theta, opts.grid_per_dim);
  VectorXd grid_best = grid.front();
  double grid_nll = std::numeric_limits<double>::infinity();
  bool all_clamped = true;
  for (const auto& th : grid) {
    const NllValue v = neg_log_likelihood_full(scn, hist, th, T, opts);
    if (!v.clamped) all_clamped = false;
    if (v.value < grid_nll) {
      grid_nll = v.value;
      grid_best = th;
    }
  }

  ParameterEstimate est;
  est.t_fit = T;
  est.grid_best = grid_best;

  if (all_clamped) {
    est.degenerate = true;
    est.theta_hat = prev ? project_to_box(scn.Theta, prev->theta_hat)
                         : VectorXd(0.5 * (scn.Theta.box_lo() + scn.Theta.box_hi()));
    est.nll = nll_of(est.theta_hat);
    return est;
  }

  VectorXd start = grid_best;
  double f_start = grid_nll;
  if (prev) {
    const VectorXd cand = project_to_box(scn.Theta, prev->theta_hat);
    const double f_cand = nll_of(cand);
    if (f_cand < f_start) {
      start = cand;
      f_start = f_cand;
    }
  }
  auto [theta_hat, nll] = compass_search(nll_of, scn.Theta, start, f_start, opts,
                                         est.refine_iterations);
  est.theta_hat = theta_hat;
  est.nll = nll;
  return est;
}

double trajectory_kl(const Scenario& scn, const VectorXd& theta_a, const VectorXd& theta_b,
                     const VectorXd& x0, const std::vector<VectorXd>& inputs, int t0) {
  if (!scn.Theta.contains(theta_a, 1e-9) || !scn.Theta.contains(theta_b, 1e-9)) {
    throw ContractError("trajectory_kl: parameters outside Theta");
  }
  std::function<double(double, double)> kl = scn.reward.step_kl;
  if (!kl) {
    if (scn.reward.family == RewardModel::Family::kGaussian) {
      const double sigma = scn.reward.sigma;
      if (sigma == 0.0) {
        kl = [](double ha, double hb) {
          if (ha == hb) return 0.0;
          throw UnsupportedError("trajectory_kl: degenerate family with differing means");
        };
      } else {
        kl = [sigma](double ha, double hb) {
          const double d = ha - hb;
          return d * d / (2.0 * sigma * sigma);
        };
      }
    } else {
      throw UnsupportedError("trajectory_kl: no registered KL for this reward family");
    }
  }
  double total = 0.0;
  VectorXd xa = x0, xb = x0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const int t = t0 + static_cast<int>(i);
    total += kl(scn.reward.mean_h(xa, inputs[i], theta_a, t),
                scn.reward.mean_h(xb, inputs[i], theta_b, t));
    xa = scn.A * xa + scn.B * inputs[i] + scn.residual.g(xa, inputs[i], theta_a, t);
    xb = scn.A * xb + scn.B * inputs[i] + scn.residual.g(xb, inputs[i], theta_b, t);
  }
  return total;
}

std::vector<ConcentrationPoint> concentration_curve(const Scenario& scn, const History& hist,
                                                    const std::vector<int>& checkpoints,
                                                    const EstimationOptions& opts) {
  std::vector<ConcentrationPoint> out;
  std::optional<ParameterEstimate> prev;
  for (int t : checkpoints) {
    if (t < 2 || t > hist.steps()) continue;
    const ParameterEstimate est = mle_fit(scn, hist, prev, opts, t);
    prev = est;
    std::vector<VectorXd> inputs(hist.inputs.begin(), hist.inputs.begin() + t);
    const double kl = trajectory_kl(scn, scn.theta_true, est.theta_hat, hist.states[0], inputs);
    out.push_back({t, kl / static_cast<double>(t - 1), est.theta_hat});
  }
  return out;
}

// ---------------------------------------------------------------------------
// EstimatorCache
// ---------------------------------------------------------------------------
EstimatorCache::EstimatorCache(const Scenario& scn, const VectorXd& x0,
                               const EstimationOptions& opts)
    : scn_(&scn), opts_(opts), x0_(x0) {
  for (const auto& th : parameter_grid(scn.Theta, opts.grid_per_dim)) {
    grid_.push_back({th, x0, 0.0, false});
  }
}

void EstimatorCache::advance(Tracked& tr, const VectorXd& u, double r, int t) const {
  const ScalarNll fast(*scn_, opts_);
  if (fast.ok) {
    if (tr.clamped) return;  // mirrors the batch evaluator's early exit
    const double x = tr.state(0);
    const double u1 = u(0);
    if (!std::isfinite(x) || std::abs(x) > opts_.state_guard) {
      tr.clamped = true;
      tr.nll = opts_.nll_clamp;
      return;
    }
    const double z = (r - scn_->reward.h1(x, u1, tr.theta, t)) / fast.sigma;
    const double term = 0.5 * z * z + fast.log_norm;
    if (!std::isfinite(term) || term + tr.nll >= opts_.nll_clamp) {
      tr.clamped = true;
      tr.nll = opts_.nll_clamp;
      return;
    }
    tr.nll += term;
    tr.state(0) = fast.a * x + fast.b * u1 + scn_->residual.g1(x, u1, tr.theta, t);
    return;
  }
  tr.nll += nll_term_theta(*scn_, tr.state, u, tr.theta, r, t, opts_, tr.clamped);
  if (tr.nll >= opts_.nll_clamp) {
    tr.nll = opts_.nll_clamp;
    tr.clamped = true;
  }
  if (tr.state.allFinite() && tr.state.norm() <= opts_.state_guard) {
    tr.state = scn_->A * tr.state + scn_->B * u + scn_->residual.g(tr.state, u, tr.theta, t);
  }
}

void EstimatorCache::retrack(Tracked& tr) const {
  tr.state = x0_;
  tr.nll = 0.0;
  tr.clamped = false;
  for (size_t i = 0; i < rewards_.size(); ++i) {
    advance(tr, inputs_[i], rewards_[i], static_cast<int>(i));
  }
}

void EstimatorCache::full_recompute() {
  for (auto& tr : grid_) retrack(tr);
  if (refined_) retrack(*refined_);
}

void EstimatorCache::observe(const VectorXd& u, double r) {
  const int t = static_cast<int>(rewards_.size());
  for (auto& tr : grid_) advance(tr, u, r, t);
  if (refined_) advance(*refined_, u, r, t);
  inputs_.push_back(u);
  rewards_.push_back(r);
  if (opts_.full_recompute_every > 0 &&
      static_cast<int>(rewards_.size()) % opts_.full_recompute_every == 0) {
    full_recompute();
  }
}

ParameterEstimate EstimatorCache::fit(bool refine) {
  if (t() < 2) throw ContractError("EstimatorCache::fit: need at least 2 recorded rewards");

  const Tracked* best_grid = &grid_.front();
  bool all_clamped = true;
  for (const auto& tr : grid_) {
    if (!tr.clamped) all_clamped = false;
    if (tr.nll < best_grid->nll) best_grid = &tr;
  }

  ParameterEstimate est;
  est.t_fit = t();
  est.grid_best = best_grid->theta;

  if (all_clamped && (!refined_ || refined_->clamped)) {
    est.degenerate = true;
    est.theta_hat = last_ ? project_to_box(scn_->Theta, last_->theta_hat)
                          : VectorXd(0.5 * (scn_->Theta.box_lo() + scn_->Theta.box_hi()));
    est.nll = opts_.nll_clamp;
    last_ = est;
    return est;
  }

  VectorXd start = best_grid->theta;
  double f_start = best_grid->nll;
  if (refined_ && refined_->nll < f_start) {
    start = refined_->theta;
    f_start = refined_->nll;
  }

  if (refine) {
    const ScalarNll fast(*scn_, opts_);
    auto nll_of = [&](const VectorXd& th) {
      if (fast.ok) {
        return fast.evaluate(
            x0_(0), [&](int i) { return inputs_[i](0); }, [&](int i) { return rewards_[i]; },
            static_cast<int>(rewards_.size()), th);
      }
      bool clamped = false;
      double total = 0.0;
      VectorXd x = x0_;
      for (size_t i = 0; i < rewards_.size(); ++i) {
        total += nll_term_theta(*scn_, x, inputs_[i], th, rewards_[i], static_cast<int>(i),
                                opts_, clamped);
        if (total >= opts_.nll_clamp) return opts_.nll_clamp;
        x = scn_->A * x + scn_->B * inputs_[i] + scn_->residual.g(x, inputs_[i], th,
                                                                  static_cast<int>(i));
      }
      return total;
    };
    auto [theta_hat, nll] = compass_search(nll_of, scn_->Theta, start, f_start, opts_,
                                           est.refine_iterations);
    est.theta_hat = theta_hat;
    est.nll = nll;
    Tracked tr{theta_hat, x0_, 0.0, false};
    retrack(tr);
    refined_ = tr;
  } else {
    est.theta_hat = start;
    est.nll = f_start;
  }
  last_ = est;
  return est;
}

}  // namespace lbmpc
