#include <algorithm>
#include <cmath>
#include <sstream>

#include "scfo/types.hpp"
#include "scfo/validate.hpp"

namespace scfo {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

FnConstants local_constants(const LipschitzSet& lip, FnId fn, const Region& region) {
  FnConstants global = lip.global(fn);
  if (!lip.local_provider) return global;
  auto provided = lip.local_provider(fn, region);
  if (!provided) return global;

  FnConstants out = *provided;
  const int n = static_cast<int>(global.du_lo.size());
  for (int i = 0; i < n; ++i) {
    double lo = clamp(out.du_lo(i), global.du_lo(i), global.du_hi(i));
    double hi = clamp(out.du_hi(i), lo, global.du_hi(i));
    out.du_lo(i) = lo;
    out.du_hi(i) = hi;
  }
  double tlo = clamp(out.dtau.lo, global.dtau.lo, global.dtau.hi);
  double thi = clamp(out.dtau.hi, tlo, global.dtau.hi);
  out.dtau = Band{tlo, thi};
  return out;
}

std::pair<MatrixXd, MatrixXd> local_M(const LipschitzSet& lip, const Region& region) {
  if (lip.local_M_provider) {
    auto provided = lip.local_M_provider(region);
    if (provided) {
      MatrixXd lo = provided->first, hi = provided->second;
      for (int r = 0; r < lo.rows(); ++r)
        for (int c = 0; c < lo.cols(); ++c) {
          lo(r, c) = clamp(lo(r, c), lip.M_lower(r, c), lip.M_upper(r, c));
          hi(r, c) = clamp(hi(r, c), lo(r, c), lip.M_upper(r, c));
        }
      return {lo, hi};
    }
  }
  return {lip.M_lower, lip.M_upper};
}

Band noise_band(const NoiseModel& model, FnId fn, bool cost_is_experimental,
                int n_repeats) {
  const double sigma = model.sigma_for(fn, cost_is_experimental);
  const double root_n = std::sqrt(static_cast<double>(n_repeats));
  switch (model.kind) {
    case NoiseKind::Gaussian: {
      double h = 3.0 * sigma / root_n;
      return Band{-h, h};
    }
    case NoiseKind::Chebyshev: {
      // P(|w - mean| < c sigma) >= 1 - 1/c^2 = p  =>  c = 1/sqrt(1 - p)
      double c = 1.0 / std::sqrt(1.0 - model.coverage);
      double h = c * sigma / root_n;
      return Band{model.mean - h, model.mean + h};
    }
    case NoiseKind::TruncatedGaussian: {
      // Each draw is confined to +-3 sigma, so the only bound on a mean of
      // N draws that holds surely (not just with high probability) is the
      // single-draw band itself.
      double h = 3.0 * sigma;
      return Band{-h, h};
    }
  }
  return Band{};
}

std::string Scenario::label() const {
  std::string base;
  switch (reference) {
    case ReferenceRule::Primary:
    case ReferenceRule::NumericalPrimary:
      base = "primary";
      break;
    case ReferenceRule::SafePointU0:
      base = "fallback-u0";
      break;
    case ReferenceRule::Minimax:
      base = "fallback-minimax";
      break;
  }
  if (excitation_override) return base + "+excite";
  switch (variant) {
    case LineSearchVariant::Full:
      return base + "+ls";
    case LineSearchVariant::NoFutureDegradation:
      return base + "+ls2";
    case LineSearchVariant::Zero:
      return base + "+K0";
  }
  return base;
}

namespace {

void check_band_matrix(const MatrixXd& lo, const MatrixXd& hi, int rows, int cols,
                       bool strict, const std::string& name,
                       std::vector<std::string>* errors) {
  if (lo.rows() != rows || lo.cols() != cols || hi.rows() != rows || hi.cols() != cols) {
    errors->push_back(name + ": dimension mismatch");
    return;
  }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (strict ? !(lo(r, c) < hi(r, c)) : !(lo(r, c) <= hi(r, c))) {
        std::ostringstream os;
        os << name << "(" << r << "," << c << "): "
           << (strict ? "strict inequality required between lower and upper"
                      : "lower exceeds upper");
        errors->push_back(os.str());
      }
    }
}

}  // namespace

std::vector<std::string> validate_problem(const ProblemSpec& spec,
                                          const LipschitzSet& lip,
                                          const StructureInfo& structure) {
  std::vector<std::string> errors;
  const int n = spec.n_u;
  if (n < 1) errors.push_back("n_u must be >= 1");
  if (spec.u_lower.size() != n || spec.u_upper.size() != n) {
    errors.push_back("box bounds: dimension mismatch");
  } else {
    for (int i = 0; i < n; ++i)
      if (!(spec.u_lower(i) < spec.u_upper(i)))
        errors.push_back("box bounds: u_lower must be strictly below u_upper");
  }
  if (spec.n_gp < 0) errors.push_back("n_gp must be >= 0");
  if (spec.cost_kind == CostKind::Numerical && !spec.numerical_cost)
    errors.push_back("numerical cost selected but no evaluator supplied");
  for (int j = 0; j < spec.n_g(); ++j) {
    const auto& c = spec.numerical_constraints[j];
    if (!c.eval || !c.grad || !c.ball_max) {
      std::ostringstream os;
      os << "numerical constraint " << j << ": eval, grad and ball_max required";
      errors.push_back(os.str());
    }
  }

  if (n >= 1) {
    check_band_matrix(lip.g_lower, lip.g_upper, spec.n_gp, n, /*strict=*/true,
                      "kappa_g", &errors);
    check_band_matrix(lip.g_time_lower, lip.g_time_upper, spec.n_gp, 1,
                      /*strict=*/false, "kappa_g_tau", &errors);
    if (spec.cost_kind == CostKind::Experimental) {
      check_band_matrix(lip.cost_lower, lip.cost_upper, n, 1, /*strict=*/false,
                        "kappa_phi", &errors);
      if (!(lip.cost_time_lower <= lip.cost_time_upper))
        errors.push_back("kappa_phi_tau: lower exceeds upper");
      check_band_matrix(lip.M_lower, lip.M_upper, n, n, /*strict=*/true, "M_phi",
                        &errors);
    }
  }

  auto check_index_set = [&](const IndexSetFlag& s, const std::string& name) {
    for (int i : s.indices)
      if (i < 0 || i >= n) errors.push_back(name + ": index out of range");
  };
  if (static_cast<int>(structure.conc_g.size()) != spec.n_gp) {
    errors.push_back("structure: conc_g must have one entry per experimental constraint");
  } else {
    for (int j = 0; j < spec.n_gp; ++j) {
      std::ostringstream os;
      os << "conc_g[" << j << "]";
      check_index_set(structure.conc_g[j], os.str());
    }
  }
  check_index_set(structure.conv_cost, "conv_cost");
  check_index_set(structure.conc_cost, "conc_cost");
  return errors;
}

std::vector<std::string> validate_slack_policy(const SlackPolicy& policy,
                                               const ProblemSpec& spec) {
  std::vector<std::string> errors;
  auto check = [&](const VectorXd& d_max, const VectorXd& budget, const VectorXd& beta,
                   int count, const std::string& name) {
    if (d_max.size() != count || budget.size() != count || beta.size() != count) {
      errors.push_back(name + ": dimension mismatch");
      return;
    }
    for (int j = 0; j < count; ++j) {
      if (d_max(j) < 0) errors.push_back(name + ": d_max must be >= 0");
      if (!(budget(j) > 0)) errors.push_back(name + ": integral budget must be > 0");
      if (beta(j) < 0 || beta(j) >= 1) errors.push_back(name + ": beta must lie in [0,1)");
      double bound = (budget(j) - d_max(j)) / budget(j);
      if (beta(j) > bound + 1e-15) {
        std::ostringstream os;
        os << name << "[" << j << "]: beta " << beta(j) << " exceeds (d_S - d_max)/d_S = "
           << bound;
        errors.push_back(os.str());
      }
    }
  };
  check(policy.d_max_g, policy.integral_budget_g, policy.beta_g, spec.n_gp, "slack_g");
  check(policy.d_max_num, policy.integral_budget_num, policy.beta_num, spec.n_g(),
        "slack_num");
  return errors;
}

std::vector<std::string> validate_noise(const NoiseModel& noise,
                                        const ProblemSpec& spec) {
  std::vector<std::string> errors;
  const int want = (spec.cost_kind == CostKind::Experimental ? 1 : 0) + spec.n_gp;
  if (noise.sigma.size() != want) {
    errors.push_back("noise: sigma must have one entry per experimental function");
    return errors;
  }
  for (int i = 0; i < noise.sigma.size(); ++i)
    if (noise.sigma(i) < 0) errors.push_back("noise: sigma must be >= 0");
  if (noise.kind == NoiseKind::Chebyshev &&
      !(noise.coverage > 0 && noise.coverage < 1))
    errors.push_back("noise: Chebyshev coverage must lie in (0,1)");
  return errors;
}

}  // namespace scfo
