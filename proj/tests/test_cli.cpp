#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lbmpc/csv.hpp"
#include "lbmpc/runconfig.hpp"
#include "lbmpc/svg.hpp"

using namespace lbmpc;
namespace fs = std::filesystem;

#ifndef LBMPC_CLI_PATH
#define LBMPC_CLI_PATH "lbmpc"
#endif

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lbmpc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LBMPC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("cli simulate: smoke cases and byte-identical reruns") {
  const auto dir = fresh_dir("simulate");

  // Example 1, oracle, decisions at t = 0 and 1
  write(dir / "ex1.json", R"({
    "scenario": {"preset": "example1"},
    "policy": {"mode": "oracle", "N": 1},
    "T": 2, "seed": 7, "out": ")" + (dir / "ex1_out").string() + R"("
  })");
  REQUIRE(run_cli("simulate --config " + (dir / "ex1.json").string()) == 0);
  const std::string h1 = slurp(dir / "ex1_out/history.csv");
  {
    std::istringstream is(h1);
    const History h = read_history_csv(is);
    REQUIRE(h.steps() == 2);
    CHECK(h.rewards[0] + h.rewards[1] == doctest::Approx(-0.75).epsilon(1e-9));
  }
  REQUIRE(run_cli("simulate --config " + (dir / "ex1.json").string()) == 0);
  CHECK(slurp(dir / "ex1_out/history.csv") == h1);  // idempotent bytes

  // HVAC preset runs to completion with all states inside X
  write(dir / "hvac.json", R"({
    "scenario": {"preset": "hvac"},
    "policy": {"mode": "epsilon_greedy", "N": 1, "c": 5.0, "refit_stride": 4},
    "T": 100, "seed": 11, "out": ")" + (dir / "hvac_out").string() + R"("
  })");
  REQUIRE(run_cli("simulate --config " + (dir / "hvac.json").string()) == 0);
  {
    std::istringstream is(slurp(dir / "hvac_out/history.csv"));
    const History h = read_history_csv(is);
    REQUIRE(h.steps() == 100);
    for (const auto& x : h.states) {
      CHECK(x(0) >= 20.0 - 1e-9);
      CHECK(x(0) <= 24.0 + 1e-9);
    }
  }

  // degenerate T = 0
  write(dir / "t0.json", R"({
    "scenario": {"preset": "example1"},
    "policy": {"mode": "oracle", "N": 0},
    "T": 0, "seed": 1, "out": ")" + (dir / "t0_out").string() + R"("
  })");
  REQUIRE(run_cli("simulate --config " + (dir / "t0.json").string()) == 0);
  {
    std::istringstream is(slurp(dir / "t0_out/history.csv"));
    const History h = read_history_csv(is);
    CHECK(h.steps() == 0);
    CHECK(h.states.size() == 1);
  }
}

TEST_CASE("cli regret: outputs, determinism across jobs, svg round trip") {
  const auto dir = fresh_dir("regret");
  write(dir / "cfg.json", R"({
    "scenario": {"preset": "example2"},
    "policy": {"mode": "epsilon_greedy", "N": 1, "c": 5.0, "refit_stride": 4},
    "T": 64, "replicates": 8, "seed": 33, "jobs": 2, "plot": true,
    "out": ")" + (dir / "out").string() + R"("
  })");
  REQUIRE(run_cli("regret --config " + (dir / "cfg.json").string()) == 0);
  const std::string curve = slurp(dir / "out/regret_curve.csv");
  const std::string raw = slurp(dir / "out/regret_raw.csv");
  const std::string svg = slurp(dir / "out/regret.svg");

  // rerun with a different worker count: byte-identical outputs
  REQUIRE(run_cli("regret --config " + (dir / "cfg.json").string() + " --jobs 1") == 0);
  CHECK(slurp(dir / "out/regret_curve.csv") == curve);
  CHECK(slurp(dir / "out/regret_raw.csv") == raw);
  CHECK(slurp(dir / "out/regret.svg") == svg);

  // the SVG metadata block carries the curve verbatim
  std::istringstream svg_in(svg);
  const std::string meta = read_svg_metadata(svg_in);
  std::istringstream curve_in(curve);
  std::string line;
  std::vector<double> means;
  while (std::getline(curve_in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    const auto f = detail::split_csv_line(line);
    means.push_back(std::stod(f[1]));
  }
  for (double m : means) {
    CHECK(meta.find(fmt_double(m)) != std::string::npos);
  }
}

TEST_CASE("cli estimate: fits from a simulated history") {
  const auto dir = fresh_dir("estimate");
  write(dir / "sim.json", R"({
    "scenario": {"preset": "hvac"},
    "policy": {"mode": "epsilon_greedy", "N": 1, "c": 1e18, "refit_stride": 64},
    "T": 120, "seed": 5, "out": ")" + (dir / "sim_out").string() + R"("
  })");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string()) == 0);

  write(dir / "est.json", R"({
    "scenario": {"preset": "hvac"},
    "history": ")" + (dir / "sim_out/history.csv").string() + R"(",
    "checkpoints": [16, 32, 64, 120],
    "seed": 5, "out": ")" + (dir / "est_out").string() + R"("
  })");
  REQUIRE(run_cli("estimate --config " + (dir / "est.json").string()) == 0);
  const std::string theta = slurp(dir / "est_out/theta.csv");
  CHECK(theta.find("component,theta_hat,grid_best") != std::string::npos);
  const std::string conc = slurp(dir / "est_out/concentration.csv");
  int rows = 0;
  std::istringstream is(conc);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && std::isdigit(line[0])) ++rows;
  }
  CHECK(rows == 4);
}

TEST_CASE("cli invariant-set: worked examples and the stability error") {
  const auto dir = fresh_dir("invset");
  write(dir / "ex1.json", R"({"scenario": {"preset": "example1"}, "out": "."})");
  RunConfig cfg = load_run_config((dir / "ex1.json").string());
  std::ostringstream os;
  CHECK(cmd_invariant_set(cfg, os) == 0);
  CHECK(os.str().find("omega interval: [-1, 1]") != std::string::npos);
  CHECK(os.str().find("residual_containment: 0") != std::string::npos);

  write(dir / "ex2.json", R"({"scenario": {"preset": "example2"}, "out": "."})");
  RunConfig cfg2 = load_run_config((dir / "ex2.json").string());
  std::ostringstream os2;
  CHECK(cmd_invariant_set(cfg2, os2) == 0);
  CHECK(os2.str().find("omega interval: [-0.5, 0.5]") != std::string::npos);

  // unstable A with K = 0: nonzero exit with a message
  write(dir / "unstable.json", R"({
    "scenario": {
      "name": "unstable", "A": [[1.5]], "B": [[0.0]],
      "X": {"box": {"lo": [-1], "hi": [1]}},
      "U": {"box": {"lo": [-1], "hi": [1]}},
      "W": {"box": {"lo": [0], "hi": [0]}},
      "Theta": {"box": {"lo": [0], "hi": [0]}},
      "theta_true": [0],
      "residual": "zero",
      "reward": {"family": "gaussian", "sigma": 0.0, "mean": "example1"}
    },
    "out": "."
  })");
  CHECK(run_cli("invariant-set --config " + (dir / "unstable.json").string()) != 0);
}

TEST_CASE("cli: config errors exit nonzero") {
  const auto dir = fresh_dir("badcfg");
  write(dir / "bad.json", R"({"policy": {"mode": "oracle"}})");
  CHECK(run_cli("simulate --config " + (dir / "bad.json").string()) != 0);
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) != 0);
}
