#include "scfo/simharness.hpp"

#include <cmath>
#include <stdexcept>

namespace scfo {

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

// Affine derivative form c0 + cu'u + ct*tau with exact corner min/max.
struct AffineForm {
  double c0 = 0.0;
  VectorXd cu;
  double ct = 0.0;

  Band range(const Region& r) const {
    double lo = c0, hi = c0;
    for (int i = 0; i < cu.size(); ++i) {
      lo += std::min(cu(i) * r.lo(i), cu(i) * r.hi(i));
      hi += std::max(cu(i) * r.lo(i), cu(i) * r.hi(i));
    }
    lo += std::min(ct * r.t_lo, ct * r.t_hi);
    hi += std::max(ct * r.t_lo, ct * r.t_hi);
    return Band{lo, hi};
  }
};

constexpr double kStrictMargin = 1e-3;

struct PlantForms {
  // Per function: affine forms of each d/du_i and d/dtau, when affine.
  std::vector<AffineForm> cost_du;
  AffineForm cost_dtau;
  bool cost_affine = false;
  std::vector<std::vector<AffineForm>> g_du;
  std::vector<AffineForm> g_dtau;
};

LipschitzSet degrading_constants() {
  LipschitzSet lip;
  lip.g_lower.resize(2, 2);
  lip.g_upper.resize(2, 2);
  lip.g_lower << -10, 0, -2, 0;
  lip.g_upper << 3, 2, 3, 2;
  lip.g_time_lower = vec2(-1.0 / 1000, -1.0 / 500);
  lip.g_time_upper = vec2(1.0 / 1000, 1.0 / 500);
  lip.cost_lower = vec2(-2.0, -1.6);
  lip.cost_upper = vec2(0.0, 0.8);
  lip.cost_time_lower = -2.0 / 500;
  lip.cost_time_upper = 2.0 / 500;
  lip.M_lower.resize(2, 2);
  lip.M_upper.resize(2, 2);
  lip.M_lower << 1, -1, -1, 1;
  lip.M_upper << 3, 1, 1, 3;
  return lip;
}

StructureInfo example_structure() {
  StructureInfo st;
  st.conc_g.resize(2);
  st.conc_g[0].indices = {0, 1};
  st.conc_g[0].eta = false;
  st.conc_g[1].indices = {1};
  st.conc_g[1].eta = true;
  st.conv_cost.indices = {0, 1};
  st.conv_cost.eta = true;
  return st;
}

SeparableQuadratic circle_constraint() {
  // g1(u) = -u1^2 - (u2 - 0.15)^2 + 0.01
  SeparableQuadratic q;
  q.quad = vec2(-1.0, -1.0);
  q.lin = vec2(0.0, 0.3);
  q.constant = -0.15 * 0.15 + 0.01;
  return q;
}

void install_experimental_constraints(Plant* p, double sign_g2) {
  // g_p1(u,tau) = -6 u1^2 - (3.5 + tau/500) u1 + u2 - 0.6
  // g_p2(u,tau) =  2 u1^2 + 0.5 u1 + u2 - 0.75 + sign * tau/500
  p->g.push_back([](const VectorXd& u, double tau) {
    return -6 * u(0) * u(0) - (3.5 + tau / 500) * u(0) + u(1) - 0.6;
  });
  p->g_grad_u.push_back([](const VectorXd& u, double tau) {
    return vec2(-12 * u(0) - 3.5 - tau / 500, 1.0);
  });
  p->g_grad_tau.push_back([](const VectorXd& u, double) { return -u(0) / 500; });

  p->g.push_back([sign_g2](const VectorXd& u, double tau) {
    return 2 * u(0) * u(0) + 0.5 * u(0) + u(1) - 0.75 + sign_g2 * tau / 500;
  });
  p->g_grad_u.push_back(
      [](const VectorXd& u, double) { return vec2(4 * u(0) + 0.5, 1.0); });
  p->g_grad_tau.push_back([sign_g2](const VectorXd&, double) { return sign_g2 / 500; });
}

PlantForms degrading_forms(double sign_g2, bool degrading) {
  PlantForms f;
  const double scale = degrading ? 1.0 : 0.0;
  // cost (u1 - 0.5)^2 + (u2 - 0.4 - scale*tau/500)^2
  f.cost_affine = true;
  f.cost_du.resize(2);
  f.cost_du[0] = AffineForm{-1.0, vec2(2, 0), 0.0};
  f.cost_du[1] = AffineForm{-0.8, vec2(0, 2), -2.0 * scale / 500};
  f.cost_dtau = AffineForm{0.8 * scale / 500, vec2(0, -2.0 * scale / 500),
                           2.0 * scale * scale / (500 * 500)};
  f.g_du.resize(2);
  f.g_dtau.resize(2);
  f.g_du[0] = {AffineForm{-3.5, vec2(-12, 0), -scale / 500}, AffineForm{1.0, vec2(0, 0), 0}};
  f.g_dtau[0] = AffineForm{0.0, vec2(-scale / 500, 0), 0};
  f.g_du[1] = {AffineForm{0.5, vec2(4, 0), 0}, AffineForm{1.0, vec2(0, 0), 0}};
  f.g_dtau[1] = AffineForm{sign_g2 * scale / 500, vec2(0, 0), 0};
  return f;
}

void install_local_providers(Plant* p, const PlantForms& forms) {
  p->analytic_local_provider =
      [forms](FnId fn, const Region& r) -> std::optional<FnConstants> {
    const std::vector<AffineForm>* du = nullptr;
    const AffineForm* dtau = nullptr;
    if (fn.is_cost) {
      if (!forms.cost_affine) return std::nullopt;
      du = &forms.cost_du;
      dtau = &forms.cost_dtau;
    } else {
      du = &forms.g_du.at(fn.constraint);
      dtau = &forms.g_dtau.at(fn.constraint);
    }
    FnConstants c;
    const int n = static_cast<int>(du->size());
    c.du_lo.resize(n);
    c.du_hi.resize(n);
    for (int i = 0; i < n; ++i) {
      Band b = (*du)[i].range(r);
      c.du_lo(i) = b.lo - kStrictMargin;
      c.du_hi(i) = b.hi + kStrictMargin;
    }
    Band bt = dtau->range(r);
    c.dtau = Band{bt.lo - kStrictMargin, bt.hi + kStrictMargin};
    return c;
  };
  // The example costs have a constant Hessian; the local M is that value
  // with the strictness margin, clamped into the globals downstream.
  MatrixXd H(2, 2);
  H << 2, 0, 0, 2;
  p->analytic_local_M_provider =
      [H](const Region&) -> std::optional<std::pair<MatrixXd, MatrixXd>> {
    return std::make_pair(H.array() - kStrictMargin, H.array() + kStrictMargin);
  };
}

Plant make_box_plant(const std::string& name) {
  Plant p;
  p.name = name;
  p.u_lower = vec2(-0.5, 0.0);
  p.u_upper = vec2(0.5, 0.8);
  p.numerical.push_back(circle_constraint());
  p.structure = example_structure();
  return p;
}

Plant make_degrading(double sign_g2, const std::string& name) {
  Plant p = make_box_plant(name);
  p.cost = [](const VectorXd& u, double tau) {
    const double d = u(1) - 0.4 - tau / 500;
    return (u(0) - 0.5) * (u(0) - 0.5) + d * d;
  };
  p.cost_grad_u = [](const VectorXd& u, double tau) {
    return vec2(2 * (u(0) - 0.5), 2 * (u(1) - 0.4 - tau / 500));
  };
  p.cost_grad_tau = [](const VectorXd& u, double tau) {
    return -2.0 * (u(1) - 0.4 - tau / 500) / 500;
  };
  install_experimental_constraints(&p, sign_g2);
  p.paper_constants = degrading_constants();
  p.default_u0 = vec2(-0.35, 0.1);
  install_local_providers(&p, degrading_forms(sign_g2, /*degrading=*/true));
  return p;
}

Plant make_static_like(const VectorXd& cost_center, const std::string& name) {
  Plant p = make_box_plant(name);
  p.cost = [cost_center](const VectorXd& u, double) {
    return (u - cost_center).squaredNorm();
  };
  p.cost_grad_u = [cost_center](const VectorXd& u, double) {
    return VectorXd(2.0 * (u - cost_center));
  };
  p.cost_grad_tau = [](const VectorXd&, double) { return 0.0; };
  // Static constraints: the degrading family with the time terms fixed at 0.
  p.g.push_back([](const VectorXd& u, double) {
    return -6 * u(0) * u(0) - 3.5 * u(0) + u(1) - 0.6;
  });
  p.g_grad_u.push_back(
      [](const VectorXd& u, double) { return vec2(-12 * u(0) - 3.5, 1.0); });
  p.g_grad_tau.push_back([](const VectorXd&, double) { return 0.0; });
  p.g.push_back([](const VectorXd& u, double) {
    return 2 * u(0) * u(0) + 0.5 * u(0) + u(1) - 0.75;
  });
  p.g_grad_u.push_back(
      [](const VectorXd& u, double) { return vec2(4 * u(0) + 0.5, 1.0); });
  p.g_grad_tau.push_back([](const VectorXd&, double) { return 0.0; });

  LipschitzSet lip = degrading_constants();
  lip.g_time_lower = vec2(0.0, 0.0);
  lip.g_time_upper = vec2(0.0, 0.0);
  lip.cost_time_lower = 0.0;
  lip.cost_time_upper = 0.0;
  // First-order cost bands for this center over the box.
  lip.cost_lower = vec2(2 * (-0.5 - cost_center(0)), 2 * (0.0 - cost_center(1)));
  lip.cost_upper = vec2(2 * (0.5 - cost_center(0)), 2 * (0.8 - cost_center(1)));
  p.paper_constants = lip;
  p.default_u0 = vec2(-0.35, 0.1);
  install_local_providers(&p, degrading_forms(0.0, /*degrading=*/false));
  // Static cost derivative forms depend on the center; override.
  return p;
}

Plant make_switching() {
  Plant p = make_static_like(vec2(0.5, 0.4), "switching");
  const VectorXd c1 = vec2(0.5, 0.4), c2 = vec2(-0.25, 0.6);
  p.cost = [c1, c2](const VectorXd& u, double tau) {
    return (u - (tau > 50 ? c2 : c1)).squaredNorm();
  };
  p.cost_grad_u = [c1, c2](const VectorXd& u, double tau) {
    return VectorXd(2.0 * (u - (tau > 50 ? c2 : c1)));
  };
  p.cost_grad_tau = [](const VectorXd&, double) { return 0.0; };
  // Cost bands must cover both regimes.
  LipschitzSet& lip = p.paper_constants;
  lip.cost_lower = vec2(2 * (-0.5 - 0.5), 2 * (0.0 - 0.6));
  lip.cost_upper = vec2(2 * (0.5 + 0.25), 2 * (0.8 - 0.4));
  // The switch is a cost reset, not degradation: old cost data is dropped by
  // the harness, so zero time-constants remain valid within each regime.
  return p;
}

void fix_cost_forms(Plant* p, const VectorXd& center) {
  PlantForms f = degrading_forms(0.0, false);
  f.cost_du[0] = AffineForm{-2 * center(0), vec2(2, 0), 0.0};
  f.cost_du[1] = AffineForm{-2 * center(1), vec2(0, 2), 0.0};
  f.cost_dtau = AffineForm{0.0, vec2(0, 0), 0.0};
  install_local_providers(p, f);
}

}  // namespace

std::vector<std::string> builtin_plant_names() {
  return {"static", "degrading_plus", "degrading_minus", "unconstrained", "switching"};
}

Plant builtin_plant(const std::string& name) {
  if (name == "degrading_plus") return make_degrading(+1.0, name);
  if (name == "degrading_minus") return make_degrading(-1.0, name);
  if (name == "static") {
    Plant p = make_static_like(vec2(0.5, 0.4), name);
    fix_cost_forms(&p, vec2(0.5, 0.4));
    return p;
  }
  if (name == "unconstrained") {
    Plant p = make_static_like(vec2(0.2, 0.4), name);
    // Published first-order cost constants for this variant.
    p.paper_constants.cost_lower = vec2(-1.4, -0.8);
    p.paper_constants.cost_upper = vec2(0.6, 0.8);
    fix_cost_forms(&p, vec2(0.2, 0.4));
    return p;
  }
  if (name == "switching") {
    Plant p = make_switching();
    // Local cost forms are regime-dependent; keep the provider for the
    // constraints only.
    PlantForms f = degrading_forms(0.0, false);
    f.cost_affine = false;
    install_local_providers(&p, f);
    return p;
  }
  throw std::invalid_argument("unknown plant: " + name);
}

ProblemSpec plant_problem(const Plant& plant, bool cost_numerical) {
  ProblemSpec spec;
  spec.n_u = plant.n_u;
  spec.u_lower = plant.u_lower;
  spec.u_upper = plant.u_upper;
  spec.n_gp = plant.n_gp;
  for (const auto& q : plant.numerical)
    spec.numerical_constraints.push_back(make_separable_constraint(q));
  if (cost_numerical) {
    spec.cost_kind = CostKind::Numerical;
    NumericalCost nc;
    auto cost = plant.cost;
    auto grad = plant.cost_grad_u;
    // Numerical costs are time-free by definition; freeze tau = 0.
    nc.eval = [cost](const VectorXd& u) { return cost(u, 0.0); };
    nc.grad = [grad](const VectorXd& u) { return grad(u, 0.0); };
    spec.numerical_cost = nc;
  } else {
    spec.cost_kind = CostKind::Experimental;
  }
  return spec;
}

Measurement measure(const Plant& plant, const VectorXd& u, double tau,
                    const NoiseModel& noise, bool cost_numerical, SplitRng& rng) {
  Measurement m;
  m.u = u;
  m.time = tau;
  auto draw = [&](int fn_index) {
    const double sigma = noise.sigma(fn_index);
    switch (noise.kind) {
      case NoiseKind::Gaussian:
        return sigma * rng.normal();
      case NoiseKind::TruncatedGaussian:
        return sigma * rng.normal_truncated(3.0);
      case NoiseKind::Chebyshev:
        return noise.mean + sigma * rng.normal();
    }
    return 0.0;
  };
  int idx = 0;
  if (!cost_numerical) m.cost_hat = plant.cost(u, tau) + draw(idx++);
  m.g_hat.resize(plant.n_gp);
  for (int j = 0; j < plant.n_gp; ++j) m.g_hat(j) = plant.g[j](u, tau) + draw(idx++);
  return m;
}

GradientEstimate artificial_gradient(const Plant& plant, FnId fn, const VectorXd& u,
                                     double tau, double alpha_sigma,
                                     const LipschitzSet& lip, SplitRng& rng) {
  GradientEstimate ge;
  ge.at_u = u;
  ge.at_tau = tau;
  const FnConstants global = lip.global(fn);
  const int n = static_cast<int>(u.size());
  VectorXd truth(n);
  double truth_tau;
  if (fn.is_cost) {
    truth = plant.cost_grad_u(u, tau);
    truth_tau = plant.cost_grad_tau(u, tau);
  } else {
    truth = plant.g_grad_u[fn.constraint](u, tau);
    truth_tau = plant.g_grad_tau[fn.constraint](u, tau);
  }
  ge.estimate.resize(n);
  ge.lower.resize(n);
  ge.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    const double range = global.du_hi(i) - global.du_lo(i);
    ge.estimate(i) = truth(i) + alpha_sigma * range * rng.uniform_pm();
    ge.lower(i) = ge.estimate(i) - alpha_sigma * range;
    ge.upper(i) = ge.estimate(i) + alpha_sigma * range;
  }
  const double trange = global.dtau.hi - global.dtau.lo;
  ge.dtau_estimate = truth_tau + alpha_sigma * trange * rng.uniform_pm();
  ge.dtau = Band{ge.dtau_estimate - alpha_sigma * trange,
                 ge.dtau_estimate + alpha_sigma * trange};
  return ge;
}

std::optional<FnConstants> polynomial_local_lipschitz(const Plant& plant, FnId fn,
                                                      const Region& region) {
  if (!plant.analytic_local_provider) return std::nullopt;
  return plant.analytic_local_provider(fn, region);
}

}  // namespace scfo
