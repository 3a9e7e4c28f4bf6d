#include "scfo/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace scfo {

Region ball_region(const ProblemSpec& spec, const VectorXd& center, double delta_e,
                   double tau_ref, double tau_next) {
  Region r;
  r.lo = (center.array() - delta_e).cwiseMax(spec.u_lower.array()).matrix();
  r.hi = (center.array() + delta_e).cwiseMin(spec.u_upper.array()).matrix();
  // Degenerate protection when the center itself sits outside the box.
  r.lo = r.lo.cwiseMin(r.hi);
  r.t_lo = std::min(tau_ref, tau_next);
  r.t_hi = std::max(tau_ref, tau_next);
  return r;
}

VectorXd kappa_m(int j, const ProblemSpec& spec, const LipschitzSet& lip,
                 const StructureInfo& structure, const VectorXd& center,
                 double tau_ref, double tau_next, double delta_e,
                 const GradientEstimate* gradient) {
  const Region region = ball_region(spec, center, delta_e, tau_ref, tau_next);
  const FnConstants local = local_constants(lip, FnId::g(j), region);
  const IndexSetFlag conc = structure.local(FnId::g(j), /*convexity=*/false, region);
  VectorXd km(spec.n_u);
  for (int i = 0; i < spec.n_u; ++i) {
    if (gradient && conc.contains(i))
      km(i) = std::max(std::abs(gradient->lower(i)), std::abs(gradient->upper(i)));
    else
      km(i) = std::max(std::abs(local.du_lo(i)), std::abs(local.du_hi(i)));
  }
  return km;
}

double experimental_backoff(int j, const ProblemSpec& spec, const LipschitzSet& lip,
                            const StructureInfo& structure, const VectorXd& center,
                            double tau_ref, double tau_next, double delta_e,
                            const GradientEstimate* gradient) {
  const Region region = ball_region(spec, center, delta_e, tau_ref, tau_next);
  const FnConstants local = local_constants(lip, FnId::g(j), region);
  const IndexSetFlag conc = structure.local(FnId::g(j), /*convexity=*/false, region);
  const double dt = tau_next - tau_ref;
  double deg;
  if (conc.eta && gradient)
    deg = gradient->dtau.hi * dt;
  else
    deg = local.dtau.hi * dt;
  const VectorXd km =
      kappa_m(j, spec, lip, structure, center, tau_ref, tau_next, delta_e, gradient);
  return deg + delta_e * km.norm();
}

double numerical_backoff(int j, const ProblemSpec& spec, const VectorXd& center,
                         double delta_e) {
  const NumericalConstraint& c = spec.numerical_constraints.at(j);
  return c.ball_max(center, delta_e) - c.eval(center);
}

double ball_max_box_bound(const SeparableQuadratic& f, const VectorXd& center,
                          double radius) {
  double total = f.constant;
  for (int i = 0; i < center.size(); ++i) {
    const double lo = center(i) - radius, hi = center(i) + radius;
    const double a = f.quad(i), b = f.lin(i);
    double best = std::max(a * lo * lo + b * lo, a * hi * hi + b * hi);
    if (a < 0) {
      const double vertex = -b / (2 * a);
      if (vertex >= lo && vertex <= hi)
        best = std::max(best, a * vertex * vertex + b * vertex);
    }
    total += best;
  }
  return total;
}

NumericalConstraint make_separable_constraint(const SeparableQuadratic& f) {
  NumericalConstraint c;
  c.eval = [f](const VectorXd& u) { return f.eval(u); };
  c.grad = [f](const VectorXd& u) { return f.gradient(u); };
  c.ball_max = [f](const VectorXd& center, double radius) {
    return ball_max_box_bound(f, center, radius);
  };
  return c;
}

double ball_max_sampled(const std::function<double(const VectorXd&)>& f,
                        const VectorXd& center, double radius, int samples) {
  double best = f(center);
  const int n = static_cast<int>(center.size());
  // Deterministic low-discrepancy-ish directions from a fixed recurrence.
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  auto next_unit = [&]() {
    VectorXd d(n);
    double norm2 = 0;
    for (int i = 0; i < n; ++i) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      const double u = static_cast<double>(state >> 11) * 0x1p-53;
      d(i) = 2.0 * u - 1.0;
      norm2 += d(i) * d(i);
    }
    if (norm2 == 0) d(0) = 1.0;
    return VectorXd(d / std::max(std::sqrt(norm2), 1e-300));
  };
  for (int s = 0; s < samples; ++s) best = std::max(best, f(center + radius * next_unit()));
  return best;
}

}  // namespace scfo
