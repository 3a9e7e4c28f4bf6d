#ifndef SCFO_SIMHARNESS_HPP
#define SCFO_SIMHARNESS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "scfo/geometry.hpp"
#include "scfo/rng.hpp"
#include "scfo/types.hpp"

namespace scfo {

// Simulated experimental plant: true cost/constraints with their exact
// derivatives, everything C^2 on the box-time range.
struct Plant {
  std::string name;
  int n_u = 2;
  int n_gp = 2;
  VectorXd u_lower, u_upper;
  double tau_bar = 200.0;
  VectorXd default_u0;

  std::function<double(const VectorXd&, double)> cost;
  std::function<VectorXd(const VectorXd&, double)> cost_grad_u;
  std::function<double(const VectorXd&, double)> cost_grad_tau;
  std::vector<std::function<double(const VectorXd&, double)>> g;
  std::vector<std::function<VectorXd(const VectorXd&, double)>> g_grad_u;
  std::vector<std::function<double(const VectorXd&, double)>> g_grad_tau;
  std::vector<SeparableQuadratic> numerical;

  // Published global constants and structure declarations for this plant.
  LipschitzSet paper_constants;
  StructureInfo structure;

  // Analytic local-constant provider (affine-derivative corner analysis),
  // installable into a LipschitzSet for the local-relaxation mode.
  LocalConstantsProvider analytic_local_provider;
  LocalMProvider analytic_local_M_provider;

  double true_g(int j, const VectorXd& u, double tau) const { return g[j](u, tau); }
};

// The built-in case-study plants, by name: "static", "degrading_plus",
// "degrading_minus", "unconstrained", "switching".
Plant builtin_plant(const std::string& name);
std::vector<std::string> builtin_plant_names();

// ProblemSpec view of a plant (cost treated as numerical when requested).
ProblemSpec plant_problem(const Plant& plant, bool cost_numerical);

// One noisy experiment at (u, tau). Draws one value per experimental
// function from the stream, in order (cost first when experimental).
Measurement measure(const Plant& plant, const VectorXd& u, double tau,
                    const NoiseModel& noise, bool cost_numerical, SplitRng& rng);

// Artificial gradient estimator: true derivatives corrupted by additive
// uniform noise scaled by the global Lipschitz ranges, with matching boxes
// that always contain the truth.
GradientEstimate artificial_gradient(const Plant& plant, FnId fn, const VectorXd& u,
                                     double tau, double alpha_sigma,
                                     const LipschitzSet& lip, SplitRng& rng);

// Local first-order constants from the plant's affine derivative forms:
// min/max over the region corners with a strictness margin. Returns the
// plant's global constants when the derivative is not affine on the region.
std::optional<FnConstants> polynomial_local_lipschitz(const Plant& plant, FnId fn,
                                                      const Region& region);

}  // namespace scfo

#endif  // SCFO_SIMHARNESS_HPP
