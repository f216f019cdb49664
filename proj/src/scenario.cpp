#include "lbmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbmpc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double RewardModel::log_density_at(double r, const VectorXd& x, const VectorXd& u,
                                   const VectorXd& theta, int t) const {
  switch (family) {
    case Family::kGaussian: {
      if (sigma == 0.0) {
        // degenerate: all mass at the mean
        return r == mean_h(x, u, theta, t) ? 0.0 : -std::numeric_limits<double>::infinity();
      }
      const double z = (r - mean_h(x, u, theta, t)) / sigma;
      return -0.5 * z * z - std::log(sigma) - 0.5 * kLog2Pi;
    }
    case Family::kBernoulli: {
      const double p = std::clamp(mean_h(x, u, theta, t), 0.0, 1.0);
      return r > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    case Family::kCustom:
      return log_density(r, x, u, theta, t);
  }
  return -std::numeric_limits<double>::infinity();
}

void validate_scenario(Scenario& scn, int samples, bool strict) {
  auto& v = scn.validation;
  v.theta_in_theta = scn.Theta.contains(scn.theta_true, 1e-12);

  Rng rng(0x5ca1ab1e);  // fixed stream: validation is deterministic
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const VectorXd x = sample_uniform(scn.X, rng);
    const VectorXd u = sample_uniform(scn.U, rng);
    const VectorXd g = scn.residual.g(x, u, scn.theta_true, s % 1024);
    const double viol = (scn.W.normals() * g - scn.W.offsets()).maxCoeff();
    if (viol > worst) {
      worst = viol;
      v.worst_x = x;
      v.worst_u = u;
    }
  }
  v.w_violation = std::max(0.0, worst);

  if (strict) {
    if (!v.theta_in_theta) throw ContractError(scn.name + ": theta_true outside Theta");
    if (v.w_violation > 1e-9) {
      throw ContractError(scn.name + ": residual range escapes W (violation " +
                          std::to_string(v.w_violation) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Example 1: x+ = u on [-1,1], reward -(u^2 + (x-1)^2), no residual, W = {0}.
// ---------------------------------------------------------------------------
Scenario example1_scenario() {
  Scenario s;
  s.name = "example1";
  s.A = MatrixXd::Zero(1, 1);
  s.B = MatrixXd::Identity(1, 1);
  s.residual.name = "zero";
  s.residual.g = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return VectorXd::Zero(1);
  };
  s.residual.dg_dx = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(1, 1);
  };
  s.residual.dg_du = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(1, 1);
  };
  s.residual.g1 = [](double, double, const VectorXd&, int) { return 0.0; };
  s.residual.dg1_dx = [](double, double, const VectorXd&, int) { return 0.0; };
  s.residual.dg1_du = [](double, double, const VectorXd&, int) { return 0.0; };
  s.theta_true = VectorXd::Zero(1);
  s.Theta = HPolytope::interval(0.0, 0.0);
  s.W = HPolytope::interval(0.0, 0.0);
  s.X = HPolytope::interval(-1.0, 1.0);
  s.U = HPolytope::interval(-1.0, 1.0);
  s.reward.family = RewardModel::Family::kGaussian;
  s.reward.sigma = 0.0;  // Example 1 is deterministic
  s.reward.mean_h = [](const VectorXd& x, const VectorXd& u, const VectorXd&, int) {
    return -(u(0) * u(0) + (x(0) - 1.0) * (x(0) - 1.0));
  };
  s.reward.dh_dx = [](const VectorXd& x, const VectorXd&, const VectorXd&, int) {
    VectorXd g(1);
    g << -2.0 * (x(0) - 1.0);
    return g;
  };
  s.reward.dh_du = [](const VectorXd&, const VectorXd& u, const VectorXd&, int) {
    VectorXd g(1);
    g << -2.0 * u(0);
    return g;
  };
  s.reward.h1 = [](double x, double u, const VectorXd&, int) {
    return -(u * u + (x - 1.0) * (x - 1.0));
  };
  s.reward.dh1_dx = [](double x, double, const VectorXd&, int) { return -2.0 * (x - 1.0); };
  s.reward.dh1_du = [](double, double u, const VectorXd&, int) { return -2.0 * u; };
  s.K = MatrixXd::Zero(1, 1);
  s.k0 = VectorXd::Zero(1);
  s.x0 = VectorXd::Ones(1);
  validate_scenario(s, 2000);
  return s;
}

// ---------------------------------------------------------------------------
// Example 2: x+ = -(2-u) x^2 (A = B = 0), reward -((u-theta)^2 + (x+1/2)^2).
// The oracle holds the unstable fixed point x = -1/2 with u = 0; a learner
// that explores with u > 0 gets pushed toward the stable fixed point 0 where
// the reward is permanently lower.
// ---------------------------------------------------------------------------
Scenario example2_scenario() {
  Scenario s;
  s.name = "example2";
  s.A = MatrixXd::Zero(1, 1);
  s.B = MatrixXd::Zero(1, 1);
  s.residual.name = "example2";
  s.residual.g = [](const VectorXd& x, const VectorXd& u, const VectorXd&, int) {
    VectorXd g(1);
    g << -(2.0 - u(0)) * x(0) * x(0);
    return g;
  };
  s.residual.dg_dx = [](const VectorXd& x, const VectorXd& u, const VectorXd&, int) {
    MatrixXd j(1, 1);
    j << -2.0 * (2.0 - u(0)) * x(0);
    return j;
  };
  s.residual.dg_du = [](const VectorXd& x, const VectorXd&, const VectorXd&, int) {
    MatrixXd j(1, 1);
    j << x(0) * x(0);
    return j;
  };
  s.residual.g1 = [](double x, double u, const VectorXd&, int) { return -(2.0 - u) * x * x; };
  s.residual.dg1_dx = [](double x, double u, const VectorXd&, int) {
    return -2.0 * (2.0 - u) * x;
  };
  s.residual.dg1_du = [](double x, double, const VectorXd&, int) { return x * x; };
  s.theta_true = VectorXd::Zero(1);
  s.Theta = HPolytope::interval(0.0, 1.0);
  s.W = HPolytope::interval(-0.5, 0.5);
  s.X = HPolytope::interval(-0.5, 0.5);
  s.U = HPolytope::interval(0.0, 1.0);
  s.reward.family = RewardModel::Family::kGaussian;
  s.reward.sigma = 1.0;
  s.reward.mean_h = [](const VectorXd& x, const VectorXd& u, const VectorXd& th, int) {
    const double du = u(0) - th(0);
    const double dx = x(0) + 0.5;
    return -(du * du + dx * dx);
  };
  s.reward.dh_dx = [](const VectorXd& x, const VectorXd&, const VectorXd&, int) {
    VectorXd g(1);
    g << -2.0 * (x(0) + 0.5);
    return g;
  };
  s.reward.dh_du = [](const VectorXd&, const VectorXd& u, const VectorXd& th, int) {
    VectorXd g(1);
    g << -2.0 * (u(0) - th(0));
    return g;
  };
  s.reward.h1 = [](double x, double u, const VectorXd& th, int) {
    const double du = u - th(0);
    const double dx = x + 0.5;
    return -(du * du + dx * dx);
  };
  s.reward.dh1_dx = [](double x, double, const VectorXd&, int) { return -2.0 * (x + 0.5); };
  s.reward.dh1_du = [](double, double u, const VectorXd& th, int) {
    return -2.0 * (u - th(0));
  };
  s.K = MatrixXd::Zero(1, 1);
  s.k0 = VectorXd::Zero(1);
  s.x0 = VectorXd::Constant(1, -0.5);
  validate_scenario(s, 2000);
  return s;
}

// ---------------------------------------------------------------------------
// Stable 2-state LTI system with quadratic reward, theta = (q1, q2, r).
// ---------------------------------------------------------------------------
Scenario lti_scenario() {
  Scenario s;
  s.name = "lti";
  s.A = MatrixXd(2, 2);
  s.A << 0.7, 0.2, 0.0, 0.5;
  s.B = MatrixXd(2, 1);
  s.B << 0.0, 1.0;
  s.residual.name = "zero";
  s.residual.g = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return VectorXd::Zero(2);
  };
  s.residual.dg_dx = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(2, 2);
  };
  s.residual.dg_du = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(2, 1);
  };
  s.theta_true = VectorXd(3);
  s.theta_true << 1.0, 0.5, 0.2;
  {
    VectorXd lo(3), hi(3);
    lo << 0.1, 0.1, 0.05;
    hi << 2.0, 2.0, 1.0;
    s.Theta = HPolytope::box(lo, hi);
  }
  {
    VectorXd z = VectorXd::Zero(2);
    s.W = HPolytope::box(z, z);
  }
  {
    VectorXd lo(2), hi(2);
    lo << -5.0, -5.0;
    hi << 5.0, 5.0;
    s.X = HPolytope::box(lo, hi);
  }
  s.U = HPolytope::interval(-1.0, 1.0);
  s.reward.family = RewardModel::Family::kGaussian;
  s.reward.sigma = 0.5;
  s.reward.mean_h = [](const VectorXd& x, const VectorXd& u, const VectorXd& th, int) {
    return -(th(0) * x(0) * x(0) + th(1) * x(1) * x(1) + th(2) * u(0) * u(0));
  };
  s.reward.dh_dx = [](const VectorXd& x, const VectorXd&, const VectorXd& th, int) {
    VectorXd g(2);
    g << -2.0 * th(0) * x(0), -2.0 * th(1) * x(1);
    return g;
  };
  s.reward.dh_du = [](const VectorXd&, const VectorXd& u, const VectorXd& th, int) {
    VectorXd g(1);
    g << -2.0 * th(2) * u(0);
    return g;
  };
  s.K = MatrixXd::Zero(1, 2);
  s.k0 = VectorXd::Zero(1);
  s.x0 = VectorXd(2);
  s.x0 << 2.0, -1.0;
  validate_scenario(s, 2000);
  return s;
}

InvariantSetCertificate scenario_certificate(const Scenario& scn, const InvariantSetOptions& opts) {
  return max_output_admissible_set(scn.A, scn.B, scn.K, scn.X, scn.U, scn.W, opts, scn.k0);
}

}  // namespace lbmpc
