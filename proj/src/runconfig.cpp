#include "lbmpc/runconfig.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "lbmpc/csv.hpp"
#include "lbmpc/svg.hpp"

namespace lbmpc {

using nlohmann::json;

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ContractError("matrix: expected non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw ContractError("matrix: ragged rows");
    for (size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

VectorXd vector_from_json(const json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

HPolytope polytope_from_json(const json& j) {
  if (j.contains("box")) {
    return HPolytope::box(vector_from_json(j["box"]["lo"]), vector_from_json(j["box"]["hi"]));
  }
  return HPolytope(matrix_from_json(j["normals"]), vector_from_json(j["offsets"]));
}

HvacParams hvac_params_from_json(const json& o) {
  HvacParams p;
  auto get = [&](const char* k, double& dst) {
    if (o.contains(k)) dst = o[k].get<double>();
  };
  auto geti = [&](const char* k, int& dst) {
    if (o.contains(k)) dst = o[k].get<int>();
  };
  get("k_r", p.k_r);
  get("k_c", p.k_c);
  get("k_v", p.k_v);
  get("sigma", p.sigma);
  get("gamma1", p.gamma1);
  get("gamma2", p.gamma2);
  get("v_mean", p.v_mean);
  get("v_amp", p.v_amp);
  geti("v_peak_step", p.v_peak_step);
  get("q_mean", p.q_mean);
  get("q_amp", p.q_amp);
  geti("q_peak_step", p.q_peak_step);
  get("price_offpeak", p.price_offpeak);
  get("price_peak", p.price_peak);
  if (o.contains("theta_lo")) p.theta_lo = vector_from_json(o["theta_lo"]);
  if (o.contains("theta_hi")) p.theta_hi = vector_from_json(o["theta_hi"]);
  return p;
}

Scenario scenario_from_json(const json& j) {
  if (j.is_string()) {
    std::ifstream in(j.get<std::string>());
    if (!in) throw ContractError("scenario: cannot open " + j.get<std::string>());
    json inner;
    in >> inner;
    return scenario_from_json(inner);
  }
  if (j.contains("preset")) {
    const std::string preset = j["preset"].get<std::string>();
    const json overrides = j.value("overrides", json::object());
    Scenario s;
    if (preset == "example1") {
      s = example1_scenario();
    } else if (preset == "example2") {
      s = example2_scenario();
    } else if (preset == "lti") {
      s = lti_scenario();
    } else if (preset == "hvac") {
      const bool strict = overrides.value("strict", true);
      s = build_hvac_scenario(hvac_params_from_json(overrides), strict);
    } else {
      throw ContractError("scenario: unknown preset " + preset);
    }
    if (overrides.contains("x0")) s.x0 = vector_from_json(overrides["x0"]);
    if (overrides.contains("sigma") && preset != "hvac") {
      s.reward.sigma = overrides["sigma"].get<double>();
    }
    return s;
  }

  // Inline form: matrices + sets + residual/reward selectors.
  Scenario s;
  s.name = j.value("name", std::string("custom"));
  s.A = matrix_from_json(j.at("A"));
  s.B = matrix_from_json(j.at("B"));
  s.X = polytope_from_json(j.at("X"));
  s.U = polytope_from_json(j.at("U"));
  s.W = polytope_from_json(j.at("W"));
  s.Theta = polytope_from_json(j.at("Theta"));
  s.theta_true = vector_from_json(j.at("theta_true"));

  const std::string residual = j.value("residual", std::string("zero"));
  const int n = s.n();
  if (residual == "zero" || residual == "lti") {
    s.residual.name = "zero";
    s.residual.g = [n](const VectorXd&, const VectorXd&, const VectorXd&, int) {
      return VectorXd::Zero(n);
    };
  } else if (residual == "example2") {
    s.residual = example2_scenario().residual;
  } else if (residual == "hvac") {
    throw ContractError("scenario: use the hvac preset for the hvac residual");
  } else {
    throw ContractError("scenario: unknown residual " + residual +
                        " (custom residuals are code-registered, not serialized)");
  }

  const json rw = j.value("reward", json::object());
  const std::string family = rw.value("family", std::string("gaussian"));
  if (family == "gaussian") {
    s.reward.family = RewardModel::Family::kGaussian;
  } else if (family == "bernoulli") {
    s.reward.family = RewardModel::Family::kBernoulli;
  } else {
    throw ContractError("scenario: unknown reward family " + family);
  }
  s.reward.sigma = rw.value("sigma", 1.0);
  const std::string mean = rw.value("mean", std::string());
  if (mean == "example1") {
    s.reward.mean_h = example1_scenario().reward.mean_h;
  } else if (mean == "example2") {
    s.reward.mean_h = example2_scenario().reward.mean_h;
  } else if (mean == "lti_quadratic") {
    auto proto = lti_scenario();
    s.reward.mean_h = proto.reward.mean_h;
    s.reward.dh_dx = proto.reward.dh_dx;
    s.reward.dh_du = proto.reward.dh_du;
  } else {
    throw ContractError("scenario: reward.mean selector required (built-in registry)");
  }

  if (j.contains("K")) s.K = matrix_from_json(j["K"]);
  else s.K = MatrixXd::Zero(s.q(), n);
  if (j.contains("k0")) s.k0 = vector_from_json(j["k0"]);
  else s.k0 = VectorXd::Zero(s.q());
  if (j.contains("x0")) s.x0 = vector_from_json(j["x0"]);
  else s.x0 = s.X.chebyshev_center().first;

  validate_scenario(s, 10000, j.value("strict", true));
  return s;
}

PolicyConfig policy_from_json(const json& j) {
  PolicyConfig p;
  p.mode = policy_mode_from_string(j.value("mode", std::string("epsilon_greedy")));
  p.N = j.value("N", 1);
  p.c = j.value("c", 5.0);
  p.refit_stride = j.value("refit_stride", 1);
  p.refine_every = j.value("refine_every", 256);
  if (j.contains("x0")) p.x0 = vector_from_json(j["x0"]);
  if (j.contains("theta_schedule")) {
    for (const auto& e : j["theta_schedule"]) {
      p.theta_schedule.emplace_back(e.at("from").get<int>(), vector_from_json(e.at("theta")));
    }
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    p.solver.stationarity_tol = s.value("stationarity_tol", p.solver.stationarity_tol);
    p.solver.max_iterations = s.value("max_iterations", p.solver.max_iterations);
    p.solver.multistarts = s.value("multistarts", p.solver.multistarts);
    p.solver.fd_step = s.value("fd_step", p.solver.fd_step);
  }
  if (j.contains("estimation")) {
    const json& e = j["estimation"];
    p.estimation.grid_per_dim = e.value("grid_per_dim", p.estimation.grid_per_dim);
    p.estimation.refine_max_iterations =
        e.value("refine_max_iterations", p.estimation.refine_max_iterations);
    p.estimation.refine_step_floor = e.value("refine_step_floor", p.estimation.refine_step_floor);
    p.estimation.full_recompute_every =
        e.value("full_recompute_every", p.estimation.full_recompute_every);
  }
  return p;
}

}  // namespace

std::string polytope_to_json(const HPolytope& P) {
  json j;
  j["normals"] = matrix_to_json(P.normals());
  json offs = json::array();
  for (int i = 0; i < P.num_rows(); ++i) offs.push_back(P.offsets()(i));
  j["offsets"] = offs;
  return j.dump();
}

HPolytope polytope_from_json_text(const std::string& text) {
  return polytope_from_json(json::parse(text));
}

Scenario scenario_from_json_text(const std::string& text) {
  return scenario_from_json(json::parse(text));
}

RunConfig run_config_from_json_text(const std::string& text, const std::string& base_dir) {
  const json j = json::parse(text);
  RunConfig cfg;
  if (!j.contains("scenario")) throw ContractError("config: scenario required");
  json scen = j["scenario"];
  if (scen.is_string()) {
    std::filesystem::path p = scen.get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    scen = json::parse(std::ifstream(p));
  }
  cfg.scenario = scenario_from_json(scen);
  cfg.scenario_name = cfg.scenario.name;
  if (j.contains("policy")) cfg.policy = policy_from_json(j["policy"]);
  cfg.T = j.value("T", 100);
  cfg.replicates = j.value("replicates", 1);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.policy.seed = cfg.seed;
  cfg.jobs = j.value("jobs", 0);
  cfg.plot = j.value("plot", false);
  cfg.out_dir = j.value("out", std::string("."));
  cfg.history_path = j.value("history", std::string());
  if (j.contains("checkpoints")) {
    for (const auto& c : j["checkpoints"]) cfg.checkpoints.push_back(c.get<int>());
  }
  if (cfg.T < 0) throw ContractError("config: T must be >= 0");
  if (cfg.replicates < 1) throw ContractError("config: replicates must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str(),
                                   std::filesystem::path(path).parent_path().string());
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
  }
  fs::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------
int cmd_simulate(const RunConfig& cfg) {
  const auto cert = scenario_certificate(cfg.scenario);
  const RunResult res = run(cfg.scenario, cert, cfg.policy, cfg.T);
  std::ostringstream os;
  write_history_csv(os, res.hist, cfg.scenario.n(), cfg.scenario.q(), cfg.scenario.p(),
                    {"seed=" + std::to_string(cfg.seed), "scenario=" + cfg.scenario_name,
                     "mode=" + std::string(to_string(cfg.policy.mode)),
                     "N=" + std::to_string(cfg.policy.N)});
  write_file_atomic(cfg.out_dir + "/history.csv", os.str());

  if (cfg.plot) {
    PlotSeries xs;
    xs.label = "x1";
    for (int t = 0; t <= res.hist.steps(); ++t) {
      xs.x.push_back(t);
      xs.y.push_back(res.hist.states[t](0));
    }
    PlotSpec spec;
    spec.title = cfg.scenario_name + " closed loop";
    spec.y_label = "x";
    std::ostringstream svg;
    write_svg_plot(svg, spec, {xs});
    write_file_atomic(cfg.out_dir + "/history.svg", svg.str());
  }
  std::cout << "simulate: " << cfg.T << " steps, " << res.diag.explore_count
            << " explorations, outputs in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_regret(const RunConfig& cfg) {
  const auto cert = scenario_certificate(cfg.scenario);
  const RegretStudy study =
      replicate(cfg.scenario, cert, cfg.policy, cfg.T, cfg.replicates, cfg.seed, cfg.jobs);

  std::ostringstream curve;
  curve << "# seed=" << cfg.seed << "\n# scenario=" << cfg.scenario_name
        << "\n# N=" << cfg.policy.N << " c=" << fmt_double(cfg.policy.c)
        << " replicates=" << cfg.replicates << "\n";
  curve << "t,mean,std_error,mean_realized\n";
  for (size_t j = 0; j < study.regret.t_grid.size(); ++j) {
    curve << study.regret.t_grid[j] << "," << fmt_double(study.regret.mean(j)) << ","
          << fmt_double(study.regret.std_error(j)) << ","
          << fmt_double(study.realized_regret.mean(j)) << "\n";
  }
  write_file_atomic(cfg.out_dir + "/regret_curve.csv", curve.str());

  std::ostringstream raw;
  raw << "# seed=" << cfg.seed << "\nreplicate";
  for (int t : study.regret.t_grid) raw << ",t" << t;
  raw << "\n";
  for (int r = 0; r < study.regret.per_replicate.rows(); ++r) {
    raw << r;
    for (int j = 0; j < study.regret.per_replicate.cols(); ++j) {
      raw << "," << fmt_double(study.regret.per_replicate(r, j));
    }
    raw << "\n";
  }
  write_file_atomic(cfg.out_dir + "/regret_raw.csv", raw.str());

  {
    PlotSeries s;
    s.label = "mean regret";
    for (size_t j = 0; j < study.regret.t_grid.size(); ++j) {
      s.x.push_back(study.regret.t_grid[j]);
      s.y.push_back(study.regret.mean(j));
      s.band_halfwidth.push_back(study.regret.std_error(j));
    }
    PlotSpec spec;
    spec.title = "expected " + std::to_string(cfg.policy.N) + "-step dynamic regret (" +
                 cfg.scenario_name + ")";
    spec.x_label = "T";
    spec.y_label = "cumulative regret";
    std::ostringstream svg;
    write_svg_plot(svg, spec, {s});
    write_file_atomic(cfg.out_dir + "/regret.svg", svg.str());
  }
  std::cout << "regret: " << cfg.replicates << " replicates of " << cfg.T << " steps, outputs in "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_estimate(const RunConfig& cfg) {
  if (cfg.history_path.empty()) throw ContractError("estimate: config needs \"history\"");
  std::ifstream in(cfg.history_path);
  if (!in) throw ContractError("estimate: cannot open " + cfg.history_path);
  const History hist = read_history_csv(in);

  std::vector<int> checkpoints = cfg.checkpoints;
  if (checkpoints.empty()) {
    for (int t : geometric_grid(hist.steps())) {
      if (t >= 2) checkpoints.push_back(t);
    }
  }
  const auto curve = concentration_curve(cfg.scenario, hist, checkpoints, cfg.policy.estimation);
  const ParameterEstimate est = mle_fit(cfg.scenario, hist, std::nullopt, cfg.policy.estimation);

  std::ostringstream tj;
  tj << "# seed=" << cfg.seed << "\n# scenario=" << cfg.scenario_name << "\n";
  tj << "component,theta_hat,grid_best\n";
  for (int i = 0; i < est.theta_hat.size(); ++i) {
    tj << i << "," << fmt_double(est.theta_hat(i)) << "," << fmt_double(est.grid_best(i)) << "\n";
  }
  tj << "nll," << fmt_double(est.nll) << ",\n";
  write_file_atomic(cfg.out_dir + "/theta.csv", tj.str());

  std::ostringstream cc;
  cc << "# seed=" << cfg.seed << "\nt,kl_per_step";
  for (int i = 0; i < cfg.scenario.p(); ++i) cc << ",theta_hat" << i + 1;
  cc << "\n";
  for (const auto& pt : curve) {
    cc << pt.t << "," << fmt_double(pt.kl_per_step);
    for (int i = 0; i < pt.theta_hat.size(); ++i) cc << "," << fmt_double(pt.theta_hat(i));
    cc << "\n";
  }
  write_file_atomic(cfg.out_dir + "/concentration.csv", cc.str());
  std::cout << "estimate: theta and concentration curve written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_invariant_set(const RunConfig& cfg, std::ostream& os) {
  const auto cert = scenario_certificate(cfg.scenario);
  os << "scenario: " << cfg.scenario_name << "\n";
  os << "omega rows:\n";
  for (int i = 0; i < cert.omega.num_rows(); ++i) {
    os << "  [";
    for (int j = 0; j < cert.omega.dim(); ++j) {
      os << (j ? ", " : "") << fmt_double(cert.omega.normals()(i, j));
    }
    os << "] . x <= " << fmt_double(cert.omega.offsets()(i)) << "\n";
  }
  if (cert.omega.dim() == 1) {
    const auto [lo, hi] = cert.omega.as_interval();
    os << "omega interval: [" << fmt_double(lo) << ", " << fmt_double(hi) << "]\n";
  }
  os << "residual_containment: " << fmt_double(cert.residual_containment) << "\n";
  os << "residual_input: " << fmt_double(cert.residual_input) << "\n";
  os << "converged: " << (cert.converged ? "true" : "false")
     << " iterations: " << cert.iterations << "\n";
  return 0;
}

}  // namespace lbmpc
