#include "lbmpc/regret.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace lbmpc {

TrajectoryPair run_pair(const Scenario& scn, const InvariantSetCertificate& cert,
                        const PolicyConfig& learner_cfg, int num_steps, std::uint64_t master_seed,
                        std::uint64_t replicate_index) {
  TrajectoryPair pair;
  pair.seeds = {derive_seed(master_seed, replicate_index, 1),
                derive_seed(master_seed, replicate_index, 2),
                derive_seed(master_seed, replicate_index, 3)};

  PolicyConfig oracle_cfg = learner_cfg;
  oracle_cfg.mode = PolicyMode::kOracle;
  oracle_cfg.theta_schedule.clear();

  pair.oracle_run = run(scn, cert, oracle_cfg, num_steps, pair.seeds[0],
                        derive_seed(pair.seeds[2], 0));
  pair.learner_run = run(scn, cert, learner_cfg, num_steps, pair.seeds[1],
                         derive_seed(pair.seeds[2], 1));
  return pair;
}

RegretSeries dynamic_regret(const TrajectoryPair& pair, const Scenario& scn) {
  const History& ho = pair.oracle_run.hist;
  const History& hl = pair.learner_run.hist;
  if (ho.steps() != hl.steps()) throw ContractError("dynamic_regret: length mismatch");
  if (ho.states.empty() || hl.states.empty() || (ho.states[0] - hl.states[0]).norm() > 0) {
    throw ContractError("dynamic_regret: runs must share x0");
  }

  RegretSeries out;
  double cum = 0.0, cum_real = 0.0;
  for (int t = 0; t < ho.steps(); ++t) {
    const double gap = scn.mean_reward(ho.states[t], ho.inputs[t], scn.theta_true, t) -
                       scn.mean_reward(hl.states[t], hl.inputs[t], scn.theta_true, t);
    out.per_step_gap.push_back(gap);
    cum += gap;
    out.cumulative.push_back(cum);
    cum_real += ho.rewards[t] - hl.rewards[t];
    out.cumulative_realized.push_back(cum_real);
  }
  return out;
}

std::vector<int> geometric_grid(int T) {
  std::vector<int> grid;
  for (int t = 1; t < T; t *= 2) grid.push_back(t);
  if (grid.empty() || grid.back() != T) grid.push_back(T);
  return grid;
}

namespace {

void finalize(CurveSeries& c) {
  const int R = static_cast<int>(c.per_replicate.rows());
  const int G = static_cast<int>(c.per_replicate.cols());
  c.mean = c.per_replicate.colwise().mean();
  c.std_error = VectorXd::Zero(G);
  if (R > 1) {
    for (int j = 0; j < G; ++j) {
      const double m = c.mean(j);
      double ss = 0.0;
      for (int i = 0; i < R; ++i) {
        const double d = c.per_replicate(i, j) - m;
        ss += d * d;
      }
      c.std_error(j) = std::sqrt(ss / (R - 1)) / std::sqrt(static_cast<double>(R));
    }
  }
}

double cumulative_cost(const Scenario& scn, const History& h, int upto) {
  double c = 0.0;
  for (int t = 0; t < upto; ++t) {
    c -= scn.mean_reward(h.states[t], h.inputs[t], scn.theta_true, t);
  }
  return c;
}

}  // namespace

RegretStudy replicate(const Scenario& scn, const InvariantSetCertificate& cert,
                      const PolicyConfig& learner_cfg, int num_steps, int R,
                      std::uint64_t master_seed, int jobs) {
  if (R < 1) throw ContractError("replicate: R must be >= 1");
  const std::vector<int> grid = geometric_grid(num_steps);
  const int G = static_cast<int>(grid.size());

  RegretStudy study;
  for (CurveSeries* c : {&study.regret, &study.realized_regret, &study.oracle_cost,
                         &study.learner_cost}) {
    c->t_grid = grid;
    c->per_replicate = MatrixXd::Zero(R, G);
  }
  study.seeds.resize(R);

  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, R));

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&](int wid) {
    try {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= R) return;
        TrajectoryPair pair = run_pair(scn, cert, learner_cfg, num_steps, master_seed,
                                       static_cast<std::uint64_t>(r));
        study.seeds[r] = pair.seeds;
        const RegretSeries series = dynamic_regret(pair, scn);
        // cumulative costs on the grid (grid values index steps 1..T)
        double co = 0.0, cl = 0.0;
        int t_done = 0;
        for (int j = 0; j < G; ++j) {
          const int upto = grid[j];
          for (; t_done < upto; ++t_done) {
            co -= scn.mean_reward(pair.oracle_run.hist.states[t_done],
                                  pair.oracle_run.hist.inputs[t_done], scn.theta_true, t_done);
            cl -= scn.mean_reward(pair.learner_run.hist.states[t_done],
                                  pair.learner_run.hist.inputs[t_done], scn.theta_true, t_done);
          }
          study.regret.per_replicate(r, j) = series.cumulative[upto - 1];
          study.realized_regret.per_replicate(r, j) = series.cumulative_realized[upto - 1];
          study.oracle_cost.per_replicate(r, j) = co;
          study.learner_cost.per_replicate(r, j) = cl;
        }
      }
    } catch (...) {
      errors[wid] = std::current_exception();
      next.store(R);
    }
  };

  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (CurveSeries* c : {&study.regret, &study.realized_regret, &study.oracle_cost,
                         &study.learner_cost}) {
    finalize(*c);
  }
  return study;
}

ScalingReport scaling_fit(const CurveSeries& curve, double min_T) {
  ScalingReport rep;
  for (size_t j = 0; j < curve.t_grid.size(); ++j) {
    const double T = curve.t_grid[j];
    if (T < min_T) continue;
    const double m = curve.mean(static_cast<int>(j));
    rep.t_grid.push_back(curve.t_grid[j]);
    const double lt = std::log(T);
    rep.rho.push_back(m / (std::sqrt(T) * lt * lt));
    rep.log_t.push_back(lt);
    rep.log_regret.push_back(std::log(std::abs(m) + 1e-9));
  }
  if (rep.t_grid.size() < 4) {
    throw ContractError("scaling_fit: need at least 4 grid points with T >= min_T");
  }
  // least-squares slope of log|regret| on log T
  const int k = static_cast<int>(rep.t_grid.size());
  double mx = 0, my = 0;
  for (int i = 0; i < k; ++i) {
    mx += rep.log_t[i];
    my += rep.log_regret[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < k; ++i) {
    sxx += (rep.log_t[i] - mx) * (rep.log_t[i] - mx);
    sxy += (rep.log_t[i] - mx) * (rep.log_regret[i] - my);
  }
  rep.loglog_slope = sxy / sxx;
  return rep;
}

GapSeries cost_gap(const CurveSeries& a, const CurveSeries& b) {
  if (a.t_grid != b.t_grid) throw ContractError("cost_gap: time grids differ");
  GapSeries g;
  g.t_grid = a.t_grid;
  g.gap = a.mean - b.mean;
  g.std_error = (a.std_error.array().square() + b.std_error.array().square()).sqrt();
  return g;
}

}  // namespace lbmpc
