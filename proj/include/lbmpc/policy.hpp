#pragma once

#include <limits>
#include <map>

#include "lbmpc/estimation.hpp"
#include "lbmpc/mpc.hpp"

namespace lbmpc {

enum class PolicyMode { kEpsilonGreedy, kOracle, kPureExploit };

const char* to_string(PolicyMode m);
PolicyMode policy_mode_from_string(const std::string& s);

struct PolicyConfig {
  int N = 1;
  double c = 5.0;                 // exploration constant, epsilon_t = min{1, c/t}
  std::uint64_t seed = 0;         // master seed for self-seeded runs
  int refit_stride = 1;           // exploit steps between MLE refits
  PolicyMode mode = PolicyMode::kEpsilonGreedy;
  std::optional<VectorXd> x0;     // defaults to the scenario's x0

  // Scripted estimate sequence: (t_from, theta) pairs override the MLE from
  // t_from on. Used by regression scenarios with pinned estimates.
  std::vector<std::pair<int, VectorXd>> theta_schedule;

  SolverOptions solver;
  EstimationOptions estimation;
  // Compass refinement runs when t is a power of two or a multiple of this;
  // other refits reuse the incrementally tracked grid/refined candidates.
  int refine_every = 256;
};

// min{1, c/t}; reads c/0 as 1 so the algorithm explores before any data.
double epsilon_schedule(int t, double c);

struct StepDecision {
  VectorXd input;
  bool explored = false;
  bool used_oracle = false;
  VectorXd theta_used;  // empty on exploration steps
  double mpc_value = std::numeric_limits<double>::quiet_NaN();
  std::string solve_status = "explore";
};

// One step of the configured controller at state x, time t.
StepDecision decide(const Scenario& scn, const InvariantSetCertificate& cert, const History& hist,
                    const VectorXd& x, int t, const PolicyConfig& cfg, EstimatorCache& est,
                    Rng& rng);

struct RunDiagnostics {
  int explore_count = 0;  // K = sum s_t
  int refit_count = 0;
  int refine_count = 0;
  std::map<std::string, int> statuses;
};

struct RunResult {
  History hist;
  RunDiagnostics diag;
};

// Closed loop for `num_steps` decisions t = 0..num_steps-1. Throws
// PolicyFailure if a visited state leaves X or a solve comes back
// infeasible (Theorem 1 rules this out from feasible starts).
RunResult run(const Scenario& scn, const InvariantSetCertificate& cert, const PolicyConfig& cfg,
              int num_steps, std::uint64_t policy_seed, std::uint64_t reward_seed);

// Convenience: derives policy/reward streams from cfg.seed.
RunResult run(const Scenario& scn, const InvariantSetCertificate& cert, const PolicyConfig& cfg,
              int num_steps);

}  // namespace lbmpc
