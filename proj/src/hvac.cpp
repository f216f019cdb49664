#include "lbmpc/hvac.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace lbmpc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925;

double sinusoid(double mean, double amp, int peak_step, int period, int t) {
  const int tm = ((t % period) + period) % period;
  return mean + amp * std::cos(kTwoPi * static_cast<double>(tm - peak_step) / period);
}
}  // namespace

HvacParams HvacParams::paper_literal() {
  HvacParams p;
  p.v_mean = 6.98;
  p.q_mean = 17.0;
  p.gamma2 = 14.0;
  p.theta_lo = {15.0, 0.25, 12.0};
  p.theta_hi = {19.0, 2.00, 16.0};
  return p;
}

bool HvacParams::valid() const {
  return k_r > 0 && k_c > 0 && k_v > 0 && sigma >= 0 && period == 24 * 60 / 15 &&
         x_lo < x_hi && u_lo < u_hi && peak_start < peak_end && v_amp >= 0 && q_amp >= 0;
}

double exogenous_signal(HvacSignal kind, int t, const HvacParams& p) {
  switch (kind) {
    case HvacSignal::kOutsideTemp:
      return sinusoid(p.v_mean, p.v_amp, p.v_peak_step, p.period, t);
    case HvacSignal::kHeatLoad:
      return sinusoid(p.q_mean, p.q_amp, p.q_peak_step, p.period, t);
    case HvacSignal::kPrice: {
      const int tm = ((t % p.period) + p.period) % p.period;
      return (tm >= p.peak_start && tm < p.peak_end) ? p.price_peak : p.price_offpeak;
    }
  }
  return 0.0;
}

Scenario build_hvac_scenario(const HvacParams& params, bool strict) {
  if (!params.valid()) throw ContractError("build_hvac_scenario: invalid parameters");
  const HvacParams p = params;

  Scenario s;
  s.name = "hvac";
  s.A = MatrixXd::Constant(1, 1, p.k_r);
  s.B = MatrixXd::Constant(1, 1, -p.k_c);

  // One period of each exogenous signal, precomputed. The closures index by
  // t mod period; hot loops see table lookups instead of trig calls.
  struct Tables {
    std::vector<double> v, q_shape, price;  // q_shape: zero-mean load component
    int period;
  };
  auto tab = std::make_shared<Tables>();
  tab->period = p.period;
  for (int t = 0; t < p.period; ++t) {
    tab->v.push_back(sinusoid(p.v_mean, p.v_amp, p.v_peak_step, p.period, t));
    tab->q_shape.push_back(sinusoid(0.0, p.q_amp, p.q_peak_step, p.period, t));
    tab->price.push_back(exogenous_signal(HvacSignal::kPrice, t, p));
  }
  auto at = [](const std::shared_ptr<Tables>& tb, const std::vector<double>& col, int t) {
    return col[((t % tb->period) + tb->period) % tb->period];
  };

  // residual: k_v v_t + q_t(theta); theta = [q_mean, gamma1, gamma2]
  s.residual.name = "hvac";
  const double k_v = p.k_v;
  s.residual.g1 = [tab, at, k_v](double, double, const VectorXd& th, int t) {
    return k_v * at(tab, tab->v, t) + th(0) + at(tab, tab->q_shape, t);
  };
  s.residual.dg1_dx = [](double, double, const VectorXd&, int) { return 0.0; };
  s.residual.dg1_du = [](double, double, const VectorXd&, int) { return 0.0; };
  auto g1 = s.residual.g1;
  s.residual.g = [g1](const VectorXd& x, const VectorXd& u, const VectorXd& th, int t) {
    return VectorXd::Constant(1, g1(x(0), u(0), th, t));
  };
  s.residual.dg_dx = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(1, 1);
  };
  s.residual.dg_du = [](const VectorXd&, const VectorXd&, const VectorXd&, int) {
    return MatrixXd::Zero(1, 1);
  };

  s.theta_true = VectorXd(3);
  s.theta_true << p.q_mean, p.gamma1, p.gamma2;
  s.Theta = HPolytope::box(p.theta_lo, p.theta_hi);

  // W: exact range of the residual over one period at theta_true
  double g_lo = std::numeric_limits<double>::infinity(), g_hi = -g_lo;
  for (int t = 0; t < p.period; ++t) {
    const double g = p.k_v * exogenous_signal(HvacSignal::kOutsideTemp, t, p) +
                     exogenous_signal(HvacSignal::kHeatLoad, t, p);
    g_lo = std::min(g_lo, g);
    g_hi = std::max(g_hi, g);
  }
  if (!std::isfinite(g_lo) || !std::isfinite(g_hi)) {
    throw ContractError("build_hvac_scenario: residual range is not representable");
  }
  s.W = HPolytope::interval(g_lo, g_hi);
  s.X = HPolytope::interval(p.x_lo, p.x_hi);
  s.U = HPolytope::interval(p.u_lo, p.u_hi);

  // Nominal predictions x_bar+ = k_r x_bar - k_c u sit far below [20,24]
  // because the heat load lives in the residual; constrain them to the
  // nominal reachable hull instead of X (safety rides on the first-step
  // Omega ⊖ W constraint either way).
  {
    const double drift_lo = -p.k_c * p.u_hi / (1.0 - p.k_r);
    s.nominal_X = HPolytope::interval(std::min(drift_lo - 1.0, p.x_lo - 1.0), p.x_hi + 1.0);
  }

  s.reward.family = RewardModel::Family::kGaussian;
  s.reward.sigma = p.sigma;
  s.reward.h1 = [tab, at](double x, double u, const VectorXd& th, int t) {
    const double comfort = x - th(2) - at(tab, tab->v, t);
    return -(th(1) * at(tab, tab->price, t) * u + comfort * comfort);
  };
  s.reward.dh1_dx = [tab, at](double x, double, const VectorXd& th, int t) {
    return -2.0 * (x - th(2) - at(tab, tab->v, t));
  };
  s.reward.dh1_du = [tab, at](double, double, const VectorXd& th, int t) {
    return -th(1) * at(tab, tab->price, t);
  };
  auto h1 = s.reward.h1;
  auto dh1x = s.reward.dh1_dx;
  auto dh1u = s.reward.dh1_du;
  s.reward.mean_h = [h1](const VectorXd& x, const VectorXd& u, const VectorXd& th, int t) {
    return h1(x(0), u(0), th, t);
  };
  s.reward.dh_dx = [dh1x](const VectorXd& x, const VectorXd& u, const VectorXd& th, int t) {
    return VectorXd::Constant(1, dh1x(x(0), u(0), th, t));
  };
  s.reward.dh_du = [dh1u](const VectorXd& x, const VectorXd& u, const VectorXd& th, int t) {
    return VectorXd::Constant(1, dh1u(x(0), u(0), th, t));
  };

  // Feedback placing the closed-loop pole at 0.5, with the affine term set
  // so the loop is centered on the admissible equilibrium of the mean load.
  const double gain = (p.k_r - 0.5) / p.k_c;
  s.K = MatrixXd::Constant(1, 1, gain);
  const double g_mean = 0.5 * (g_lo + g_hi);
  const double x_eq = 0.5 * (p.x_lo + p.x_hi);
  const double u_eq = (g_mean - (1.0 - p.k_r) * x_eq) / p.k_c;
  s.k0 = VectorXd::Constant(1, u_eq - gain * x_eq);
  s.x0 = VectorXd::Constant(1, x_eq);

  s.validation.feasible_equilibrium = (u_eq > p.u_lo && u_eq < p.u_hi);
  if (strict && !s.validation.feasible_equilibrium) {
    throw ContractError(
        "build_hvac_scenario: no admissible equilibrium (mean heat load incompatible with the "
        "cooling authority); scenario is inoperable");
  }

  validate_scenario(s, 10000, strict);
  return s;
}

}  // namespace lbmpc
