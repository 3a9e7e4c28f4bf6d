#ifndef SCFO_SCENARIO_HPP
#define SCFO_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "scfo/advisor.hpp"
#include "scfo/simharness.hpp"

namespace scfo {

// Closed-loop scenario description: plant, noise, constants mode, slack
// policy, excitation radius, iteration budget and seed.
struct ScenarioConfig {
  std::string plant = "degrading_minus";
  int iterations = 100;
  std::uint64_t seed = 0;

  NoiseKind noise_kind = NoiseKind::Gaussian;
  double sigma = 0.01;
  double chebyshev_mean = 0.0;
  double chebyshev_coverage = 0.99;

  double alpha_sigma = 0.05;  // artificial gradient corruption level
  double delta_e = 0.02;

  // Per experimental constraint; empty vectors mean hard constraints.
  VectorXd slack_max_g, slack_budget_g;
  VectorXd slack_max_num, slack_budget_num;
  std::optional<VectorXd> beta_g, beta_num;  // absent: Theorem-3 maximum

  std::string constants = "paper-global";  // or "analytic-local"
  bool bad_M = false;                       // published mis-specified M
  std::optional<VectorXd> u0;
  bool excitation = true;
  bool necessary_decrease = true;
  bool consistency_checks = true;
  bool cost_numerical = false;
  int grid_points = 1001;
  int refine_steps = 30;
  double delta_r_min = 1e-6;
  std::string reference_fallback = "safe-point";  // or "minimax"
};

struct TrajectoryRow {
  int k = 0;
  double tau = 0.0;
  VectorXd u;
  double cost_true = 0.0;
  std::optional<double> cost_meas;
  VectorXd g_true;      // experimental constraints
  VectorXd g_num_true;  // numerical constraints
  VectorXd d_g, d_num;  // slacks in force at this iterate
  double gain = 0.0;
  int k_star = 0;
  std::string scenario;
  double robustness = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  VectorXd violation_integral_g;
  VectorXd violation_integral_num;
  double final_cost_true = 0.0;
  std::vector<std::string> warnings;
};

// Advisor wiring for a plant under a scenario: spec, constants, structure,
// config and the artificial gradient oracle.
struct ScenarioSetup {
  ProblemSpec spec;
  LipschitzSet lip;
  StructureInfo structure;
  AdvisorConfig advisor;
  GradientOracle oracle;
  Plant plant;
  VectorXd u0;
};

// Validates and assembles the pieces; throws std::invalid_argument on a
// malformed configuration.
ScenarioSetup prepare_scenario(const ScenarioConfig& cfg);

// Runs the closed loop for the configured number of experiments.
Trajectory run_scenario(const ScenarioConfig& cfg);

}  // namespace scfo

#endif  // SCFO_SCENARIO_HPP
