// Command-line front end: scenario runs, regret studies, estimation
// diagnostics, and invariant-set inspection.

#include <iostream>

#include "CLI11.hpp"
#include "lbmpc/runconfig.hpp"

int main(int argc, char** argv) {
  CLI::App app{"learning-based MPC simulation laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  bool jobs_set = false;
  bool plot = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration JSON")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "master seed (overrides config)")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--jobs", jobs, "worker threads for replicate studies")
        ->each([&](const std::string&) { jobs_set = true; });
    sub->add_flag("--plot", plot, "emit SVG plots");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop run, history CSV");
  CLI::App* regret = app.add_subcommand("regret", "replicated dynamic-regret study");
  CLI::App* estimate = app.add_subcommand("estimate", "MLE fit + concentration curve from a history CSV");
  CLI::App* invariant = app.add_subcommand("invariant-set", "compute and print Omega with residuals");
  for (CLI::App* sub : {simulate, regret, estimate, invariant}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    lbmpc::RunConfig cfg = lbmpc::load_run_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) {
      cfg.seed = seed;
      cfg.policy.seed = seed;
    }
    if (jobs_set) cfg.jobs = jobs;
    if (plot) cfg.plot = true;

    if (simulate->parsed()) return lbmpc::cmd_simulate(cfg);
    if (regret->parsed()) return lbmpc::cmd_regret(cfg);
    if (estimate->parsed()) return lbmpc::cmd_estimate(cfg);
    if (invariant->parsed()) return lbmpc::cmd_invariant_set(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
