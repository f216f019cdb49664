#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbmpc/hvac.hpp"
#include "lbmpc/policy.hpp"
#include "lbmpc/regret.hpp"

namespace lbmpc {

// Parsed configuration shared by the CLI subcommands.
struct RunConfig {
  Scenario scenario;
  std::string scenario_name;
  PolicyConfig policy;
  int T = 100;
  int replicates = 1;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool plot = false;
  std::string out_dir = ".";

  // estimate subcommand
  std::string history_path;
  std::vector<int> checkpoints;
};

// JSON (de)serialization of polytopes: {"normals": [[...]], "offsets": [...]}
// with {"box": {"lo": [...], "hi": [...]}} accepted on input.
std::string polytope_to_json(const HPolytope& P);
HPolytope polytope_from_json_text(const std::string& text);

// Scenario files: {"preset": "example1|example2|lti|hvac", "overrides": {...}}
// or an inline form with matrices, box bounds, a residual selector from the
// built-in registry and a reward family tag.
Scenario scenario_from_json_text(const std::string& text);

RunConfig run_config_from_json_text(const std::string& text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

// Atomic file write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

// Subcommand bodies; return a process exit status and write outputs under
// cfg.out_dir. Used by both the CLI binary and the test suite.
int cmd_simulate(const RunConfig& cfg);
int cmd_regret(const RunConfig& cfg);
int cmd_estimate(const RunConfig& cfg);
int cmd_invariant_set(const RunConfig& cfg, std::ostream& os);

}  // namespace lbmpc
