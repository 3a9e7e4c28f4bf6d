#ifndef SCFO_PROJECTION_HPP
#define SCFO_PROJECTION_HPP

#include <vector>

#include "scfo/reference.hpp"
#include "scfo/types.hpp"

namespace scfo {

struct ProjectionInputs {
  int k_star = 0;
  VectorXd target;          // externally supplied u*_{k+1}
  ProjectionParams seeds;   // step-1 magnitudes
  // Gradient estimates with boxes at (u_{k*}, tau_{k+1}); cost_grad is null
  // for numerical costs, g_grads entries may be null when no estimate exists.
  const GradientEstimate* cost_grad = nullptr;
  std::vector<const GradientEstimate*> g_grads;
};

struct ProjectionResult {
  VectorXd u_bar;
  ProjectionParams final_params;
  double robustness = 0.0;  // final P
  bool gave_up = false;     // projection floor reached; reference returned
  bool solver_failed = false;
  bool missing_gradient = false;
  // Tightened boxes at the final P, consumed by the line search.
  GradientEstimate cost_box;
  std::vector<GradientEstimate> g_boxes;
  int halvings = 0;
  int bisections = 0;
};

// Algorithm: halve the projection parameters until the estimate-gradient
// projection admits a point, then bisect the box-tightening factor P for the
// robust slack-variable QP, finalize at half the largest feasible P, and
// solve. Returns the reference unchanged when the parameter floor is hit.
ProjectionResult project_target(const AdviceContext& ctx, const ProjectionInputs& in);

}  // namespace scfo

#endif  // SCFO_PROJECTION_HPP
