#ifndef SCFO_RUNNER_HPP
#define SCFO_RUNNER_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "scfo/scenario.hpp"

namespace scfo {

// JSON scenario-config loading; collects machine-readable errors instead of
// throwing so the CLI can report them all at once.
struct ConfigLoad {
  ScenarioConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};
ConfigLoad load_scenario_config(const std::string& path);
ConfigLoad parse_scenario_config(const std::string& json_text);

// Trajectory CSV with 17-significant-digit numbers so reruns are
// byte-comparable.
void write_trajectory_csv(const Trajectory& t, std::ostream& os);

// Summary document: final cost, violation integrals, per-run metadata.
std::string summary_json(const ScenarioConfig& cfg, const Trajectory& t);

// CLI entry: run <config> [--seed N] [--iters N] [--out DIR]
// [--sweep seed=a..b] [--jobs N]. Exit codes: 0 success, 1 validation error,
// 2 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scfo

#endif  // SCFO_RUNNER_HPP
