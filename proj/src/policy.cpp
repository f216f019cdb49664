#include "lbmpc/policy.hpp"

#include <cmath>

namespace lbmpc {

const char* to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::kEpsilonGreedy:
      return "epsilon_greedy";
    case PolicyMode::kOracle:
      return "oracle";
    case PolicyMode::kPureExploit:
      return "pure_exploit";
  }
  return "?";
}

PolicyMode policy_mode_from_string(const std::string& s) {
  if (s == "epsilon_greedy") return PolicyMode::kEpsilonGreedy;
  if (s == "oracle") return PolicyMode::kOracle;
  if (s == "pure_exploit") return PolicyMode::kPureExploit;
  throw ContractError("unknown policy mode: " + s);
}

double epsilon_schedule(int t, double c) {
  if (t < 0) throw ContractError("epsilon_schedule: t must be nonnegative");
  if (!(c > 0)) throw ContractError("epsilon_schedule: c must be positive");
  if (t == 0) return 1.0;
  return std::min(1.0, c / static_cast<double>(t));
}

namespace {

bool is_power_of_two(int t) { return t > 0 && (t & (t - 1)) == 0; }

const VectorXd* scheduled_theta(const PolicyConfig& cfg, int t) {
  const VectorXd* out = nullptr;
  for (const auto& [from, th] : cfg.theta_schedule) {
    if (t >= from) out = &th;
  }
  return out;
}

VectorXd exploit_theta(const Scenario& scn, int t, const PolicyConfig& cfg, EstimatorCache& est,
                       RunDiagnostics* diag) {
  if (const VectorXd* th = scheduled_theta(cfg, t)) return *th;
  if (est.t() < 2) {
    return 0.5 * (scn.Theta.box_lo() + scn.Theta.box_hi());
  }
  const bool due = !est.last() || cfg.refit_stride <= 1 ||
                   (t % std::max(1, cfg.refit_stride)) == 0;
  if (due) {
    const bool refine =
        is_power_of_two(t) || (cfg.refine_every > 0 && t % cfg.refine_every == 0);
    est.fit(refine);
    if (diag) {
      ++diag->refit_count;
      if (refine) ++diag->refine_count;
    }
  }
  return est.last()->theta_hat;
}

StepDecision decide_impl(const Scenario& scn, const InvariantSetCertificate& cert,
                         const VectorXd& x, int t, const PolicyConfig& cfg, EstimatorCache& est,
                         Rng& rng, RunDiagnostics* diag) {
  StepDecision d;
  switch (cfg.mode) {
    case PolicyMode::kEpsilonGreedy: {
      const double eps = epsilon_schedule(t, cfg.c);
      if (rng.bernoulli(eps)) {
        HPolytope ubar;
        try {
          ubar = safe_input_set(x, scn.A, scn.B, cert.omega, scn.W, scn.U);
        } catch (const EmptySafeSetError& e) {
          throw PolicyFailure(std::string("exploration found an empty safe set: ") + e.what(), t);
        }
        d.input = sample_uniform(ubar, rng);
        d.explored = true;
        d.solve_status = "explore";
        return d;
      }
      break;  // exploit below
    }
    case PolicyMode::kOracle:
    case PolicyMode::kPureExploit:
      break;
  }

  const bool oracle = cfg.mode == PolicyMode::kOracle;
  const VectorXd theta = oracle ? scn.theta_true : exploit_theta(scn, t, cfg, est, diag);
  const MpcSolution sol = solve_vn(scn, x, theta, cfg.N, cert, t, cfg.solver, rng);
  if (!sol.feasible()) {
    throw PolicyFailure("V_N infeasible at exploitation step", t);
  }
  d.input = sol.inputs.front();
  d.explored = false;
  d.used_oracle = oracle;
  d.theta_used = theta;
  d.mpc_value = sol.value;
  d.solve_status = to_string(sol.status);
  return d;
}

}  // namespace

StepDecision decide(const Scenario& scn, const InvariantSetCertificate& cert, const History&,
                    const VectorXd& x, int t, const PolicyConfig& cfg, EstimatorCache& est,
                    Rng& rng) {
  return decide_impl(scn, cert, x, t, cfg, est, rng, nullptr);
}

RunResult run(const Scenario& scn, const InvariantSetCertificate& cert, const PolicyConfig& cfg,
              int num_steps, std::uint64_t policy_seed, std::uint64_t reward_seed) {
  if (num_steps < 0) throw ContractError("run: negative step count");
  Rng policy_rng(policy_seed);
  Rng reward_rng(reward_seed);

  VectorXd x = cfg.x0 ? *cfg.x0 : scn.x0;
  if (!scn.X.contains(x, 1e-9)) throw ContractError("run: x0 outside X");

  RunResult out;
  out.hist.states.push_back(x);
  EstimatorCache est(scn, x, cfg.estimation);

  for (int t = 0; t < num_steps; ++t) {
    const StepDecision d = decide_impl(scn, cert, x, t, cfg, est, policy_rng, &out.diag);
    if (d.explored) ++out.diag.explore_count;
    ++out.diag.statuses[d.solve_status];

    const double r = sample_reward(scn, x, d.input, t, reward_rng);
    est.observe(d.input, r);

    const StepResult step = step_true(scn, x, d.input, t);
    out.hist.append_step(d.input, r, d.explored, step.x_next, d.theta_used, d.mpc_value,
                         d.solve_status, step.violated_X);
    if (step.violated_X) {
      throw PolicyFailure("closed-loop state left X", t);
    }
    x = step.x_next;
  }
  return out;
}

RunResult run(const Scenario& scn, const InvariantSetCertificate& cert, const PolicyConfig& cfg,
              int num_steps) {
  return run(scn, cert, cfg, num_steps, derive_seed(cfg.seed, 0, 1), derive_seed(cfg.seed, 0, 2));
}

}  // namespace lbmpc
