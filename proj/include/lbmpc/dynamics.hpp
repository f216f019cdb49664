#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lbmpc/scenario.hpp"

namespace lbmpc {

// Closed-loop record: states x_0..x_T, inputs u_0..u_{T-1}, realized rewards
// and exploration flags, plus per-step controller annotations for output.
struct History {
  std::vector<VectorXd> states;
  std::vector<VectorXd> inputs;
  std::vector<double> rewards;
  std::vector<std::uint8_t> explored;

  // per-input annotations (parallel to `inputs`)
  std::vector<VectorXd> theta_hat;      // empty vector when no estimate was used
  std::vector<double> mpc_value;        // NaN on exploration steps
  std::vector<std::string> solve_status;
  std::vector<std::uint8_t> x_violation;  // successor left X

  int steps() const { return static_cast<int>(inputs.size()); }
  bool lengths_consistent() const {
    return states.size() == inputs.size() + 1 && inputs.size() == rewards.size() &&
           rewards.size() == explored.size();
  }

  void append_step(const VectorXd& u, double r, bool was_explored, const VectorXd& next_state,
                   const VectorXd& theta, double value, std::string status, bool violated);
};

struct StepResult {
  VectorXd x_next;
  bool violated_X = false;  // successor left X (recorded, never clamped)
};

// True plant: x+ = A x + B u + g(x, u, theta0; t).
StepResult step_true(const Scenario& scn, const VectorXd& x, const VectorXd& u, int t);

// Learned model rollout from x under theta: returns x_tilde_{t|t}..{t+N|t}
// where N+1 = inputs.size(); the state reached by the last input is the
// final element, so the result has inputs.size() + 1 entries.
std::vector<VectorXd> rollout_learned(const Scenario& scn, const VectorXd& x,
                                      const std::vector<VectorXd>& inputs, const VectorXd& theta,
                                      int t0);

// Nominal model rollout (residual omitted).
std::vector<VectorXd> rollout_nominal(const Scenario& scn, const VectorXd& x,
                                      const std::vector<VectorXd>& inputs, int t0);

// One stochastic reward draw with mean h(x, u, theta0; t).
double sample_reward(const Scenario& scn, const VectorXd& x, const VectorXd& u, int t, Rng& rng);

}  // namespace lbmpc
