#pragma once

#include <array>

#include "lbmpc/policy.hpp"

namespace lbmpc {

// Coupled oracle-controlled and learner-controlled closed-loop runs from the
// same initial state against the same scenario.
struct TrajectoryPair {
  RunResult oracle_run;
  RunResult learner_run;
  std::array<std::uint64_t, 3> seeds{};  // oracle, learner, reward base
};

// Two independent runs from identical x0; the oracle uses the same horizon N
// as the learner. Reward streams are independent per role.
TrajectoryPair run_pair(const Scenario& scn, const InvariantSetCertificate& cert,
                        const PolicyConfig& learner_cfg, int num_steps, std::uint64_t master_seed,
                        std::uint64_t replicate_index = 0);

// Per-step mean-reward gaps h(x_t,u_t,theta0) - h(x'_t,u'_t,theta0) and
// their running sums; `cumulative_realized` uses the noisy recorded rewards.
struct RegretSeries {
  std::vector<double> per_step_gap;
  std::vector<double> cumulative;
  std::vector<double> cumulative_realized;
};
RegretSeries dynamic_regret(const TrajectoryPair& pair, const Scenario& scn);

// A cumulative metric sampled on a time grid across replicates.
struct CurveSeries {
  std::vector<int> t_grid;
  MatrixXd per_replicate;  // R x |t_grid|
  VectorXd mean;
  VectorXd std_error;  // sample std / sqrt(R); zero when R == 1
};

struct RegretStudy {
  CurveSeries regret;            // expected (mean-reward) dynamic regret
  CurveSeries realized_regret;   // secondary: realized-reward regret
  CurveSeries oracle_cost;       // cumulative expected cost, oracle run
  CurveSeries learner_cost;      // cumulative expected cost, learner run
  std::vector<std::array<std::uint64_t, 3>> seeds;
};

// Geometric grid: powers of two below T plus T itself.
std::vector<int> geometric_grid(int T);

// R independent pairs with derived seeds, aggregated on the geometric grid.
// Replicates are distributed over `jobs` workers (0 = hardware concurrency);
// the aggregation is a deterministic index-ordered reduction.
RegretStudy replicate(const Scenario& scn, const InvariantSetCertificate& cert,
                      const PolicyConfig& learner_cfg, int num_steps, int R,
                      std::uint64_t master_seed, int jobs = 0);

struct ScalingReport {
  std::vector<int> t_grid;          // grid points with T >= min_T
  std::vector<double> rho;          // regret / (sqrt(T) * log(T)^2)
  std::vector<double> log_t;
  std::vector<double> log_regret;   // log(|regret| + 1e-9)
  double loglog_slope = 0.0;
};

// rho(T) and the log-log slope of mean regret vs T over grid points with
// T >= min_T (at least 4 required).
ScalingReport scaling_fit(const CurveSeries& curve, double min_T = 100.0);

struct GapSeries {
  std::vector<int> t_grid;
  VectorXd gap;        // mean(a) - mean(b)
  VectorXd std_error;  // combined standard error of the difference
};

// Pointwise difference of two cumulative expected cost series.
GapSeries cost_gap(const CurveSeries& a, const CurveSeries& b);

}  // namespace lbmpc
