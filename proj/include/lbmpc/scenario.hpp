#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lbmpc/polytope.hpp"
#include "lbmpc/rng.hpp"

namespace lbmpc {

// Parameterized residual g(x, u, theta; t). Exogenous signals enter through
// the time index. Analytic Jacobians are optional; the MPC solver falls back
// to finite differences when they are absent. For scalar systems the g1/...
// variants are allocation-free fast paths used by the hot loops; they must
// agree with the vector forms.
struct ResidualModel {
  std::string name = "zero";
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&, int)> g;
  std::function<MatrixXd(const VectorXd&, const VectorXd&, const VectorXd&, int)> dg_dx;
  std::function<MatrixXd(const VectorXd&, const VectorXd&, const VectorXd&, int)> dg_du;

  std::function<double(double, double, const VectorXd&, int)> g1, dg1_dx, dg1_du;
};

// Reward distribution: mean h(x, u, theta; t) plus a density family.
struct RewardModel {
  enum class Family { kGaussian, kBernoulli, kCustom };
  Family family = Family::kGaussian;
  double sigma = 1.0;  // gaussian standard deviation

  std::function<double(const VectorXd&, const VectorXd&, const VectorXd&, int)> mean_h;
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&, int)> dh_dx;
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&, int)> dh_du;

  // log p(r | x, u, theta; t); required for kCustom, derived for the others
  std::function<double(double, const VectorXd&, const VectorXd&, const VectorXd&, int)>
      log_density;

  // per-step KL(P_a || P_b) given the two means; registered for gaussian
  std::function<double(double, double)> step_kl;

  // scalar fast paths (see ResidualModel)
  std::function<double(double, double, const VectorXd&, int)> h1, dh1_dx, dh1_du;

  double log_density_at(double r, const VectorXd& x, const VectorXd& u, const VectorXd& theta,
                        int t) const;
};

// A full problem instance: dynamics x+ = Ax + Bu + g(x, u, theta0; t),
// reward draws around h, constraint sets, and the feedback used for the
// invariant-set construction. Immutable after construction.
struct Scenario {
  std::string name;
  MatrixXd A, B;
  ResidualModel residual;
  VectorXd theta_true;
  HPolytope Theta;  // box over parameters
  HPolytope W, X, U;
  // Constraint set applied to predicted nominal states (k >= 1). Defaults to
  // X; scenarios whose nominal model carries a large permanent offset from
  // the true plant (HVAC) override it with the nominal reachable hull.
  std::optional<HPolytope> nominal_X;
  RewardModel reward;
  MatrixXd K;   // suggested stabilizing feedback, u = Kx + k0
  VectorXd k0;
  VectorXd x0;  // default initial state
  std::map<std::string, double> lipschitz_metadata;

  struct Validation {
    bool theta_in_theta = false;
    double w_violation = 0.0;  // max signed violation of g(x,u,theta0) in W
    VectorXd worst_x, worst_u;
    bool feasible_equilibrium = true;  // K-feedback admissible (build self-check)
  };
  Validation validation;

  int n() const { return static_cast<int>(A.rows()); }
  int q() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(theta_true.size()); }
  bool scalar_fast_path() const {
    return n() == 1 && q() == 1 && residual.g1 && reward.h1;
  }
  const HPolytope& nominal_state_set() const { return nominal_X ? *nominal_X : X; }

  double mean_reward(const VectorXd& x, const VectorXd& u, const VectorXd& theta, int t) const {
    return reward.mean_h(x, u, theta, t);
  }
};

// Checks theta0 in Theta and the containment {g(x,u,theta0)} ⊆ W on
// `samples` points of X x U (fixed internal stream). Throws ContractError on
// violation unless `strict` is false, in which case the report is recorded.
void validate_scenario(Scenario& scn, int samples = 10000, bool strict = true);

// Built-in scenarios.
Scenario example1_scenario();                  // x+ = u, reward -(u^2 + (x-1)^2)
Scenario example2_scenario();                  // x+ = -(2-u) x^2, reward -((u-th)^2 + (x+1/2)^2)
Scenario lti_scenario();                       // stable 2-state LTI with quadratic reward

// Invariant set computed from the scenario's own K/k0 and sets.
InvariantSetCertificate scenario_certificate(const Scenario& scn,
                                             const InvariantSetOptions& opts = {});

}  // namespace lbmpc
