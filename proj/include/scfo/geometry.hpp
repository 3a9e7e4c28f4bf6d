#ifndef SCFO_GEOMETRY_HPP
#define SCFO_GEOMETRY_HPP

#include <optional>
#include <vector>

#include "scfo/types.hpp"

namespace scfo {

// Back-offs that keep an entire excitation ball of radius delta_e feasible.
struct BackoffSet {
  VectorXd experimental;  // b_{p,j} per experimental constraint
  VectorXd numerical;     // b_j per numerical constraint
  double bound = 0.0;     // b_u = delta_e, applied to the box faces
};

// Region covering the excitation ball around `center` for times in
// [tau_ref, tau_next], clipped to the problem box.
Region ball_region(const ProblemSpec& spec, const VectorXd& center, double delta_e,
                   double tau_ref, double tau_next);

// Componentwise worst-slope vector of constraint j over the excitation ball:
// absolute gradient-box endpoints on declared concave indices (falling back
// to the Lipschitz endpoints when no estimate is available), Lipschitz
// endpoints elsewhere.
VectorXd kappa_m(int j, const ProblemSpec& spec, const LipschitzSet& lip,
                 const StructureInfo& structure, const VectorXd& center,
                 double tau_ref, double tau_next, double delta_e,
                 const GradientEstimate* gradient);

// Sufficient back-off for experimental constraint j anchored at a reference
// measured at tau_ref, protecting the ball up to tau_next.
double experimental_backoff(int j, const ProblemSpec& spec, const LipschitzSet& lip,
                            const StructureInfo& structure, const VectorXd& center,
                            double tau_ref, double tau_next, double delta_e,
                            const GradientEstimate* gradient);

// Sufficient back-off for numerical constraint j: ball max minus the value at
// the center.
double numerical_backoff(int j, const ProblemSpec& spec, const VectorXd& center,
                         double delta_e);

// Separable quadratic sum_i (quad_i x_i^2 + lin_i x_i) + constant, with an
// exact box-maximization that upper-bounds the ball maximum.
struct SeparableQuadratic {
  VectorXd quad, lin;
  double constant = 0.0;

  double eval(const VectorXd& u) const {
    return (quad.array() * u.array().square() + lin.array() * u.array()).sum() +
           constant;
  }
  VectorXd gradient(const VectorXd& u) const { return 2.0 * quad.cwiseProduct(u) + lin; }
};

// Maximum of the separable quadratic over the box inscribing the ball
// {|x - center| <= radius}; exact on the box, an upper bound on the ball.
double ball_max_box_bound(const SeparableQuadratic& f, const VectorXd& center,
                          double radius);

// NumericalConstraint backed by a separable quadratic with the box bound as
// its ball_max.
NumericalConstraint make_separable_constraint(const SeparableQuadratic& f);

// Non-rigorous sampling fallback for exploratory use when no ball_max
// callback can be written: center plus boundary samples. Callers must treat
// results as estimates, not bounds.
double ball_max_sampled(const std::function<double(const VectorXd&)>& f,
                        const VectorXd& center, double radius, int samples = 2000);

}  // namespace scfo

#endif  // SCFO_GEOMETRY_HPP
