#include "lbmpc/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lbmpc/csv.hpp"
#include "lbmpc/hvac.hpp"

using namespace lbmpc;

namespace {
VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}
}  // namespace

TEST_CASE("step_true: worked examples") {
  const auto ex1 = example1_scenario();
  const auto s1 = step_true(ex1, vec1(1.0), vec1(0.5), 0);
  CHECK(s1.x_next(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_FALSE(s1.violated_X);

  const auto ex2 = example2_scenario();
  const auto s2 = step_true(ex2, vec1(-0.5), vec1(0.0), 0);
  CHECK(s2.x_next(0) == doctest::Approx(-0.5).epsilon(1e-15));  // fixed point
  CHECK_FALSE(s2.violated_X);

  // published constant assignment: from 22 C the room leaves [20,24]
  HvacParams literal = HvacParams::paper_literal();
  literal.v_amp = 0.0;
  literal.q_amp = 0.0;
  const auto hv = build_hvac_scenario(literal, /*strict=*/false);
  CHECK_FALSE(hv.validation.feasible_equilibrium);
  const auto s3 = step_true(hv, vec1(22.0), vec1(0.25), 0);
  // 0.64*22 - 2.64*0.25 + 0.10*6.98 + 17
  CHECK(s3.x_next(0) == doctest::Approx(31.118).epsilon(1e-12));
  CHECK(s3.violated_X);
}

TEST_CASE("rollout_nominal") {
  const auto ex1 = example1_scenario();
  const auto r1 = rollout_nominal(ex1, vec1(1.0), {vec1(0.3)}, 0);
  REQUIRE(r1.size() == 2);
  CHECK(r1[0](0) == doctest::Approx(1.0));
  CHECK(r1[1](0) == doctest::Approx(0.3));

  // geometric decay under zero inputs
  Scenario s = ex1;
  s.A = MatrixXd::Constant(1, 1, 0.5);
  s.B = MatrixXd::Zero(1, 1);
  const auto r2 = rollout_nominal(s, vec1(1.0), {vec1(0.0), vec1(0.0)}, 0);
  CHECK(r2[1](0) == doctest::Approx(0.5));
  CHECK(r2[2](0) == doctest::Approx(0.25));

  // HVAC linear part from 22 with u = (0, 0)
  const auto hv = build_hvac_scenario();
  const auto r3 = rollout_nominal(hv, vec1(22.0), {vec1(0.0), vec1(0.0)}, 0);
  CHECK(r3[0](0) == doctest::Approx(22.0));
  CHECK(r3[1](0) == doctest::Approx(14.08).epsilon(1e-12));
  CHECK(r3[2](0) == doctest::Approx(9.0112).epsilon(1e-12));
}

TEST_CASE("rollout_learned") {
  // g == 0 reduces the learned rollout to the nominal one
  const auto lti = lti_scenario();
  std::vector<VectorXd> us = {vec1(0.4), vec1(-0.2), vec1(0.1)};
  VectorXd x0(2);
  x0 << 1.0, -0.5;
  const auto learned = rollout_learned(lti, x0, us, lti.theta_true, 0);
  const auto nominal = rollout_nominal(lti, x0, us, 0);
  REQUIRE(learned.size() == nominal.size());
  for (size_t i = 0; i < learned.size(); ++i) {
    CHECK((learned[i] - nominal[i]).norm() == doctest::Approx(0.0));
  }

  // LTI closed form x_{t+k|t} = A^k x + sum A^{k-j-1} B u_j
  for (size_t k = 1; k < learned.size(); ++k) {
    MatrixXd Ak = MatrixXd::Identity(2, 2);
    for (size_t j = 0; j < k; ++j) Ak = lti.A * Ak;
    VectorXd expect = Ak * x0;
    for (size_t j = 0; j < k; ++j) {
      MatrixXd Ap = MatrixXd::Identity(2, 2);
      for (size_t m = 0; m + j + 1 < k; ++m) Ap = lti.A * Ap;
      expect += Ap * lti.B * us[j];
    }
    CHECK((learned[k] - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }

  // a single-input rollout equals step_true with theta substituted
  const auto ex2 = example2_scenario();
  const auto one = rollout_learned(ex2, vec1(-0.4), {vec1(0.3)}, ex2.theta_true, 5);
  const auto st = step_true(ex2, vec1(-0.4), vec1(0.3), 5);
  CHECK(one[1](0) == doctest::Approx(st.x_next(0)));

  // learned rollout at theta_true reproduces step_true iterates exactly
  const auto hv = build_hvac_scenario();
  std::vector<VectorXd> uh = {vec1(0.2), vec1(0.3), vec1(0.1), vec1(0.4)};
  const auto lr = rollout_learned(hv, hv.x0, uh, hv.theta_true, 0);
  VectorXd x = hv.x0;
  for (size_t k = 0; k < uh.size(); ++k) {
    x = step_true(hv, x, uh[k], static_cast<int>(k)).x_next;
    CHECK((lr[k + 1] - x).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("sample_reward") {
  // sigma = 0 returns exactly the mean
  const auto ex1 = example1_scenario();
  Rng rng(1);
  CHECK(sample_reward(ex1, vec1(1.0), vec1(0.5), 0, rng) ==
        doctest::Approx(-(0.25 + 0.0)).epsilon(1e-15));

  // vanishing cost at the comfort target, off-peak with u = 0
  HvacParams p;
  p.v_amp = 0.0;
  p.q_amp = 0.0;
  const auto hv = build_hvac_scenario(p);
  const double target = p.gamma2 + p.v_mean;
  const double mean = hv.mean_reward(vec1(target), vec1(0.0), hv.theta_true, 0);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-15));

  // CLT check: sample mean within 4 sigma / sqrt(n)
  const auto ex2 = example2_scenario();
  const double h = ex2.mean_reward(vec1(-0.3), vec1(0.2), ex2.theta_true, 0);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += sample_reward(ex2, vec1(-0.3), vec1(0.2), 0, rng);
  acc /= n;
  CHECK(std::abs(acc - h) <= 4.0 * ex2.reward.sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("scenario validation") {
  // example2's residual range is exactly [-1/2, 0] inside W = [-1/2, 1/2]
  const auto ex2 = example2_scenario();
  CHECK(ex2.validation.theta_in_theta);
  CHECK(ex2.validation.w_violation == doctest::Approx(0.0));

  // a scenario whose residual escapes W fails construction
  Scenario bad = example2_scenario();
  bad.W = HPolytope::interval(-0.25, 0.25);
  CHECK_THROWS_AS(validate_scenario(bad, 2000, /*strict=*/true), ContractError);

  // theta outside Theta fails
  Scenario bad2 = example2_scenario();
  bad2.theta_true = vec1(2.0);
  CHECK_THROWS_AS(validate_scenario(bad2, 100, true), ContractError);
}

TEST_CASE("history: invariants and CSV round trip") {
  History h;
  h.states.push_back(vec1(1.0));
  CHECK(h.lengths_consistent());
  h.append_step(vec1(0.5), -0.25, false, vec1(0.5), vec1(0.0), -0.5, "optimal", false);
  h.append_step(vec1(0.5), -0.5, true, vec1(0.25), VectorXd(), 0.0 / 0.0, "explore", false);
  CHECK(h.lengths_consistent());
  CHECK(h.steps() == 2);

  std::ostringstream os;
  write_history_csv(os, h, 1, 1, 1, {"seed=42"});
  std::istringstream is(os.str());
  const History back = read_history_csv(is);
  REQUIRE(back.lengths_consistent());
  REQUIRE(back.steps() == 2);
  for (int t = 0; t < 2; ++t) {
    CHECK(back.states[t](0) == h.states[t](0));  // bit-exact
    CHECK(back.inputs[t](0) == h.inputs[t](0));
    CHECK(back.rewards[t] == h.rewards[t]);
    CHECK(back.explored[t] == h.explored[t]);
  }
  CHECK(back.states[2](0) == h.states[2](0));

  // a second serialization is byte-identical
  std::ostringstream os2;
  write_history_csv(os2, back, 1, 1, 1, {"seed=42"});
  CHECK(os.str() == os2.str());
}

TEST_CASE("hvac exogenous signals") {
  HvacParams p;
  // period: exact repetition at t + 96
  for (int t = 0; t < 96; ++t) {
    CHECK(exogenous_signal(HvacSignal::kOutsideTemp, t, p) ==
          doctest::Approx(exogenous_signal(HvacSignal::kOutsideTemp, t + 96, p)).epsilon(1e-15));
    CHECK(exogenous_signal(HvacSignal::kHeatLoad, t, p) ==
          doctest::Approx(exogenous_signal(HvacSignal::kHeatLoad, t + 96, p)).epsilon(1e-15));
  }
  // single local max per period
  int maxima = 0;
  for (int t = 0; t < 96; ++t) {
    const double prev = exogenous_signal(HvacSignal::kOutsideTemp, (t + 95) % 96, p);
    const double cur = exogenous_signal(HvacSignal::kOutsideTemp, t, p);
    const double next = exogenous_signal(HvacSignal::kOutsideTemp, (t + 1) % 96, p);
    if (cur > prev && cur >= next) ++maxima;
  }
  CHECK(maxima == 1);
  CHECK(exogenous_signal(HvacSignal::kOutsideTemp, p.v_peak_step, p) ==
        doctest::Approx(p.v_mean + p.v_amp));

  // zero amplitude collapses to the mean
  HvacParams flat;
  flat.v_amp = 0.0;
  for (int t : {0, 17, 48, 95}) {
    CHECK(exogenous_signal(HvacSignal::kOutsideTemp, t, flat) == doctest::Approx(flat.v_mean));
  }

  // peak pricing inside [12:00, 18:00)
  CHECK(exogenous_signal(HvacSignal::kPrice, 47, p) == doctest::Approx(p.price_offpeak));
  CHECK(exogenous_signal(HvacSignal::kPrice, 48, p) == doctest::Approx(p.price_peak));
  CHECK(exogenous_signal(HvacSignal::kPrice, 71, p) == doctest::Approx(p.price_peak));
  CHECK(exogenous_signal(HvacSignal::kPrice, 72, p) == doctest::Approx(p.price_offpeak));
}

TEST_CASE("hvac scenario construction") {
  const auto hv = build_hvac_scenario();
  CHECK(hv.validation.feasible_equilibrium);
  CHECK(hv.validation.w_violation == doctest::Approx(0.0));
  CHECK(hv.Theta.contains(hv.theta_true, 1e-12));
  CHECK(hv.x0(0) == doctest::Approx(22.0));

  // W is the exact range of the residual over one period
  const auto [wlo, whi] = hv.W.as_interval();
  double glo = 1e300, ghi = -1e300;
  for (int t = 0; t < 96; ++t) {
    const double g = hv.residual.g(hv.x0, VectorXd::Zero(1), hv.theta_true, t)(0);
    glo = std::min(glo, g);
    ghi = std::max(ghi, g);
  }
  CHECK(wlo == doctest::Approx(glo).epsilon(1e-14));
  CHECK(whi == doctest::Approx(ghi).epsilon(1e-14));

  // invariant set exists and certifies
  const auto cert = scenario_certificate(hv);
  REQUIRE_FALSE(cert.omega.is_empty());
  CHECK(cert.residual_containment <= 1e-9);
  CHECK(cert.residual_input <= 1e-9);
  const auto S = pontryagin_diff(cert.omega, hv.W);
  CHECK_FALSE(S.is_empty());

  // safe inputs at 22 C: sub-interval of [0, 0.5] matching interval arithmetic
  const auto ubar = safe_input_set(hv.x0, hv.A, hv.B, cert.omega, hv.W, hv.U);
  const auto [ulo, uhi] = ubar.as_interval();
  const auto [slo, shi] = S.as_interval();
  // A x - k_c u in [slo, shi]  =>  u in [(Ax - shi)/k_c, (Ax - slo)/k_c] ∩ [0, 0.5]
  const double ax = hv.A(0, 0) * 22.0;
  const double olo = std::max(0.0, (ax - shi) / 2.64);
  const double ohi = std::min(0.5, (ax - slo) / 2.64);
  CHECK(ulo == doctest::Approx(olo).epsilon(1e-9));
  CHECK(uhi == doctest::Approx(ohi).epsilon(1e-9));
  CHECK(ulo >= 0.0);
  CHECK(uhi <= 0.5);

  // inoperable literal parameterization refuses a strict build
  CHECK_THROWS_AS(build_hvac_scenario(HvacParams::paper_literal(), /*strict=*/true),
                  ContractError);
}
