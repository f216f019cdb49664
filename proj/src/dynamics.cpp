#include "lbmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbmpc {

void History::append_step(const VectorXd& u, double r, bool was_explored,
                          const VectorXd& next_state, const VectorXd& theta, double value,
                          std::string status, bool violated) {
  inputs.push_back(u);
  rewards.push_back(r);
  explored.push_back(was_explored ? 1 : 0);
  theta_hat.push_back(theta);
  mpc_value.push_back(value);
  solve_status.push_back(std::move(status));
  x_violation.push_back(violated ? 1 : 0);
  states.push_back(next_state);
}

StepResult step_true(const Scenario& scn, const VectorXd& x, const VectorXd& u, int t) {
  StepResult out;
  out.x_next = scn.A * x + scn.B * u + scn.residual.g(x, u, scn.theta_true, t);
  out.violated_X = !scn.X.contains(out.x_next, 1e-9);
  return out;
}

std::vector<VectorXd> rollout_learned(const Scenario& scn, const VectorXd& x,
                                      const std::vector<VectorXd>& inputs, const VectorXd& theta,
                                      int t0) {
  std::vector<VectorXd> traj;
  traj.reserve(inputs.size() + 1);
  traj.push_back(x);
  VectorXd cur = x;
  for (size_t k = 0; k < inputs.size(); ++k) {
    cur = scn.A * cur + scn.B * inputs[k] + scn.residual.g(cur, inputs[k], theta, t0 + static_cast<int>(k));
    traj.push_back(cur);
  }
  return traj;
}

std::vector<VectorXd> rollout_nominal(const Scenario& scn, const VectorXd& x,
                                      const std::vector<VectorXd>& inputs, int /*t0*/) {
  std::vector<VectorXd> traj;
  traj.reserve(inputs.size() + 1);
  traj.push_back(x);
  VectorXd cur = x;
  for (const auto& u : inputs) {
    cur = scn.A * cur + scn.B * u;
    traj.push_back(cur);
  }
  return traj;
}

double sample_reward(const Scenario& scn, const VectorXd& x, const VectorXd& u, int t, Rng& rng) {
  const double mean = scn.reward.mean_h(x, u, scn.theta_true, t);
  switch (scn.reward.family) {
    case RewardModel::Family::kGaussian:
      return scn.reward.sigma == 0.0 ? mean : rng.gaussian(mean, scn.reward.sigma);
    case RewardModel::Family::kBernoulli:
      return rng.bernoulli(std::clamp(mean, 0.0, 1.0)) ? 1.0 : 0.0;
    case RewardModel::Family::kCustom:
      throw UnsupportedError("sample_reward: custom families need a registered sampler");
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace lbmpc
