#include "lbmpc/regret.hpp"

#include <cmath>

#include "doctest.h"
#include "lbmpc/hvac.hpp"

using namespace lbmpc;

namespace {
VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}
}  // namespace

TEST_CASE("geometric grid") {
  CHECK(geometric_grid(1) == std::vector<int>{1});
  CHECK(geometric_grid(8) == std::vector<int>{1, 2, 4, 8});
  CHECK(geometric_grid(10) == std::vector<int>{1, 2, 4, 8, 10});
}

TEST_CASE("dynamic_regret: oracle vs oracle with identical seeds is exactly zero") {
  const auto ex2 = example2_scenario();
  const auto cert = scenario_certificate(ex2);
  PolicyConfig cfg;
  cfg.mode = PolicyMode::kOracle;
  cfg.N = 1;
  TrajectoryPair pair;
  pair.oracle_run = run(ex2, cert, cfg, 32, 555, 666);
  pair.learner_run = run(ex2, cert, cfg, 32, 555, 777);  // different reward noise only
  const auto series = dynamic_regret(pair, ex2);
  for (double g : series.per_step_gap) CHECK(g == 0.0);
  CHECK(series.cumulative.back() == 0.0);
}

TEST_CASE("run_pair: pinned estimates make the learner an oracle") {
  const auto ex2 = example2_scenario();
  const auto cert = scenario_certificate(ex2);
  PolicyConfig learner;
  learner.mode = PolicyMode::kPureExploit;
  learner.N = 1;
  learner.theta_schedule = {{0, ex2.theta_true}};
  const auto pair = run_pair(ex2, cert, learner, 48, 2024);
  const auto series = dynamic_regret(pair, ex2);
  for (double g : series.per_step_gap) CHECK(std::abs(g) <= 1e-8);
}

TEST_CASE("run_pair: example-2 scripted estimates give linear regret") {
  const auto ex2 = example2_scenario();
  const auto cert = scenario_certificate(ex2);
  PolicyConfig learner;
  learner.mode = PolicyMode::kPureExploit;
  learner.N = 1;
  learner.theta_schedule = {{0, vec1(1.0)}, {1, vec1(0.0)}};

  const int T = 1024;
  const auto pair = run_pair(ex2, cert, learner, T, 99);
  const auto series = dynamic_regret(pair, ex2);
  CHECK(series.cumulative.back() > 0.0);
  // per-step gap approaches 1/4 (the reward gap between the fixed points)
  CHECK(series.per_step_gap.back() == doctest::Approx(0.25).epsilon(1e-6));

  CurveSeries curve;
  curve.t_grid = geometric_grid(T);
  curve.per_replicate = MatrixXd::Zero(1, curve.t_grid.size());
  for (size_t j = 0; j < curve.t_grid.size(); ++j) {
    curve.per_replicate(0, j) = series.cumulative[curve.t_grid[j] - 1];
  }
  curve.mean = curve.per_replicate.row(0);
  curve.std_error = VectorXd::Zero(curve.t_grid.size());
  const auto fit = scaling_fit(curve, 100.0);
  CHECK(fit.loglog_slope == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("run_pair: example-1 harness totals for N = 0 and N = 1") {
  const auto ex1 = example1_scenario();
  const auto cert = scenario_certificate(ex1);
  for (int N : {0, 1}) {
    PolicyConfig learner;
    learner.mode = PolicyMode::kOracle;  // oracle-vs-oracle through the harness
    learner.N = N;
    const auto pair = run_pair(ex1, cert, learner, 2, 123);
    double total = 0.0;
    for (int t = 0; t < 2; ++t) {
      total += ex1.mean_reward(pair.oracle_run.hist.states[t], pair.oracle_run.hist.inputs[t],
                               ex1.theta_true, t);
    }
    CHECK(total == doctest::Approx(N == 0 ? -1.0 : -0.75).epsilon(1e-9));
  }
}

TEST_CASE("regret is invariant to the reward-noise stream for scripted policies") {
  const auto ex2 = example2_scenario();
  const auto cert = scenario_certificate(ex2);
  PolicyConfig learner;
  learner.mode = PolicyMode::kPureExploit;
  learner.N = 1;
  learner.theta_schedule = {{0, vec1(1.0)}, {1, vec1(0.0)}};
  PolicyConfig oracle = learner;
  oracle.mode = PolicyMode::kOracle;
  oracle.theta_schedule.clear();

  TrajectoryPair a, b;
  a.oracle_run = run(ex2, cert, oracle, 40, 1, 100);
  a.learner_run = run(ex2, cert, learner, 40, 2, 200);
  b.oracle_run = run(ex2, cert, oracle, 40, 1, 300);  // different reward seeds
  b.learner_run = run(ex2, cert, learner, 40, 2, 400);
  const auto ra = dynamic_regret(a, ex2);
  const auto rb = dynamic_regret(b, ex2);
  for (size_t t = 0; t < ra.cumulative.size(); ++t) {
    CHECK(ra.cumulative[t] == rb.cumulative[t]);  // bit-identical
  }
}

TEST_CASE("replicate: bookkeeping, seeds, and std-error scaling") {
  const auto ex2 = example2_scenario();
  const auto cert = scenario_certificate(ex2);
  PolicyConfig learner;
  learner.mode = PolicyMode::kEpsilonGreedy;
  learner.N = 1;
  learner.c = 5.0;
  learner.refit_stride = 4;

  const auto study1 = replicate(ex2, cert, learner, 32, 1, 31337, 2);
  CHECK(study1.regret.std_error.maxCoeff() == 0.0);  // R = 1 convention

  const auto study = replicate(ex2, cert, learner, 32, 24, 31337, 2);
  // mean equals the arithmetic mean of the rows
  for (int j = 0; j < study.regret.per_replicate.cols(); ++j) {
    CHECK(study.regret.mean(j) ==
          doctest::Approx(study.regret.per_replicate.col(j).mean()).epsilon(1e-15));
  }
  // disjoint seeds: distinct replicate rows on a stochastic scenario
  bool any_diff = false;
  for (int i = 1; i < study.regret.per_replicate.rows(); ++i) {
    if (study.regret.per_replicate(i, study.regret.per_replicate.cols() - 1) !=
        study.regret.per_replicate(0, study.regret.per_replicate.cols() - 1)) {
      any_diff = true;
    }
  }
  CHECK(any_diff);
  // jobs do not change the aggregate
  const auto study_seq = replicate(ex2, cert, learner, 32, 24, 31337, 1);
  CHECK((study.regret.mean - study_seq.regret.mean).norm() == 0.0);

  // doubling R roughly halves the standard error (1/sqrt R statistics)
  const auto sA = replicate(ex2, cert, learner, 16, 150, 9090, 2);
  const auto sB = replicate(ex2, cert, learner, 16, 300, 9090, 2);
  const double ratio = sA.regret.std_error(sA.regret.std_error.size() - 1) /
                       sB.regret.std_error(sB.regret.std_error.size() - 1);
  CHECK(ratio > std::sqrt(2.0) * 0.8);
  CHECK(ratio < std::sqrt(2.0) * 1.2);
}

TEST_CASE("scaling_fit: synthetic curves") {
  CurveSeries c;
  c.t_grid = {128, 256, 512, 1024, 2048, 4096};
  c.per_replicate = MatrixXd::Zero(1, c.t_grid.size());
  c.mean = VectorXd(c.t_grid.size());
  c.std_error = VectorXd::Zero(c.t_grid.size());

  // r(T) = sqrt(T) log(T)^2: rho is constant to 1e-12
  for (size_t j = 0; j < c.t_grid.size(); ++j) {
    const double T = c.t_grid[j];
    c.mean(j) = std::sqrt(T) * std::log(T) * std::log(T);
  }
  auto fit = scaling_fit(c, 100.0);
  for (double r : fit.rho) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));

  // r(T) = T: slope 1.0 +- 0.01 and diverging rho
  for (size_t j = 0; j < c.t_grid.size(); ++j) c.mean(j) = c.t_grid[j];
  fit = scaling_fit(c, 100.0);
  CHECK(fit.loglog_slope == doctest::Approx(1.0).epsilon(0.01));
  CHECK(fit.rho.back() > fit.rho.front());

  // too few usable points
  CurveSeries tiny;
  tiny.t_grid = {128, 256};
  tiny.per_replicate = MatrixXd::Zero(1, 2);
  tiny.mean = VectorXd::Ones(2);
  tiny.std_error = VectorXd::Zero(2);
  CHECK_THROWS_AS(scaling_fit(tiny, 100.0), ContractError);
}

TEST_CASE("cost_gap") {
  CurveSeries a, b;
  a.t_grid = b.t_grid = {1, 2, 4};
  a.per_replicate = b.per_replicate = MatrixXd::Zero(1, 3);
  a.mean = VectorXd::Ones(3);
  b.mean = VectorXd::Ones(3);
  a.std_error = b.std_error = VectorXd::Zero(3);
  const auto g = cost_gap(a, b);
  CHECK(g.gap.norm() == 0.0);

  CurveSeries c = b;
  c.t_grid = {1, 2, 8};
  CHECK_THROWS_AS(cost_gap(a, c), ContractError);
}

TEST_CASE("cost_gap: null comparison on the HVAC scenario") {
  const auto hv = build_hvac_scenario();
  const auto cert = scenario_certificate(hv);
  PolicyConfig learner;
  learner.mode = PolicyMode::kEpsilonGreedy;
  learner.N = 1;
  learner.c = 5.0;
  learner.refit_stride = 8;
  const auto sA = replicate(hv, cert, learner, 128, 16, 111, 2);
  const auto sB = replicate(hv, cert, learner, 128, 16, 222, 2);
  const auto g = cost_gap(sA.learner_cost, sB.learner_cost);
  const int last = static_cast<int>(g.t_grid.size()) - 1;
  CHECK(std::abs(g.gap(last)) <= 2.5 * g.std_error(last) + 1e-9);
}
