#pragma once

#include <limits>

#include "lbmpc/dynamics.hpp"
#include "lbmpc/scenario.hpp"

namespace lbmpc {

struct SolverOptions {
  double stationarity_tol = 1e-8;  // projected-gradient residual certifying a local max
  int max_iterations = 10000;      // per multistart
  int multistarts = 8;             // center of U_bar(x) + uniform samples
  double fd_step = 1e-6;           // forward-difference step for missing Jacobians
};

struct MpcSolution {
  enum class Status { kOptimal, kFeasibleSuboptimal, kInfeasible };
  Status status = Status::kInfeasible;
  std::vector<VectorXd> inputs;          // u_{t|t} .. u_{t+N|t}
  std::vector<VectorXd> learned_states;  // x~_{t|t} .. x~_{t+N|t}
  std::vector<VectorXd> nominal_states;  // x-_{t|t} .. x-_{t+N|t}
  double value = 0.0;                    // sum of mean rewards along the learned rollout
  int solver_iterations = 0;
  double stationarity_residual = std::numeric_limits<double>::infinity();

  bool feasible() const { return status != Status::kInfeasible; }
};

const char* to_string(MpcSolution::Status s);

// Finite-horizon program V_N(x_t, theta, t): maximize the summed mean reward
// of the learned rollout subject to nominal dynamics, the first-step
// constraint A x + B u_0 in Omega ⊖ W, nominal states in the scenario's
// nominal constraint set, and inputs in U. Projected gradient ascent over
// the stacked input vector with multistarts and an active-set Newton polish.
MpcSolution solve_vn(const Scenario& scn, const VectorXd& x, const VectorXd& theta, int N,
                     const InvariantSetCertificate& cert, int t, const SolverOptions& opts,
                     Rng& rng);

// J_N: summed mean reward of an input sequence along the learned rollout.
double n_step_reward(const Scenario& scn, const VectorXd& x, const std::vector<VectorXd>& inputs,
                     const VectorXd& theta, int t);

struct FeasibilityReport {
  bool ok = true;
  VectorXd offending_w;    // disturbance vertex that broke a check
  std::string failure;     // which check failed
  int checks = 0;          // number of (vertex, stage) checks performed
};

// Theorem-1 style recursive feasibility audit: for every vertex w of W the
// successor x+ = A x + B u + w must land in Omega (hence X), and the
// feedback candidate sequence (K x+ + k0, ...) must be feasible at x+.
FeasibilityReport check_recursive_feasibility(const Scenario& scn,
                                              const InvariantSetCertificate& cert,
                                              const VectorXd& x, const VectorXd& u, int N, int t);

}  // namespace lbmpc
