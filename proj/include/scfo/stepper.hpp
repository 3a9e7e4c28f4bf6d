#ifndef SCFO_STEPPER_HPP
#define SCFO_STEPPER_HPP

#include <optional>

#include "scfo/reference.hpp"
#include "scfo/rng.hpp"
#include "scfo/types.hpp"

namespace scfo {

struct LineSearchOptions {
  int grid_points = 1001;
  int refine_steps = 30;
  // tau_{k+2}: required for the one-step-ahead excitation condition; when
  // absent the relaxed variant that drops the between-experiment degradation
  // term is used directly.
  std::optional<double> tau_next2;
  bool necessary_decrease_filter = true;
  // Optional provider of the future-time degradation derivative band at an
  // arbitrary point, used when the constraint is declared concave in time.
  // Without it the local Lipschitz band is used, which is always valid.
  std::function<std::optional<Band>(int j, const VectorXd& u)> future_time_derivative;
};

// All-data feasibility margin of experimental constraint j at filter gain K:
// the min over past records of the robust Lipschitz upper bound on
// g_j(u(K), tau_next), with u(K) = u_ref + K (u_bar - u_ref).
double feasibility_margin(const AdviceContext& ctx, int j, double K, int k_star,
                          const VectorXd& u_bar);

struct GainResult {
  double gain = 0.0;
  LineSearchVariant variant = LineSearchVariant::Zero;
};

// Largest K in [0,1] satisfying the feasibility, excitation back-off, ball,
// sufficient-decrease and necessary-decrease conditions (experimental cost).
// cost_box holds the tightened gradient box at (u_ref, tau_next); M_local the
// local second-order constants over the step region.
GainResult max_gain_search(const AdviceContext& ctx, int k_star, const VectorXd& u_bar,
                           const GradientEstimate& cost_box, const MatrixXd& M_local_lo,
                           const MatrixXd& M_local_hi, const LineSearchOptions& opts);

// Numerical-cost variant: K minimizing the known cost along the segment over
// the same feasible set, without the cost-decrease conditions.
GainResult min_cost_gain_search(const AdviceContext& ctx, int k_star,
                                const VectorXd& u_bar, const LineSearchOptions& opts);

// Geometric slack reduction: d shrinks by beta exactly when the robust upper
// bound of the newest record shows a violation.
SlackState update_slacks(const SlackPolicy& policy, const SlackState& state,
                         const VectorXd& g_upper_latest, const VectorXd& g_num_latest);

// Replaces a too-short step with a random point on the excitation sphere.
VectorXd excitation_override(const VectorXd& u_next, const VectorXd& u_ref,
                             double delta_e, SplitRng& rng);

}  // namespace scfo

#endif  // SCFO_STEPPER_HPP
