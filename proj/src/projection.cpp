#include "scfo/projection.hpp"

#include <algorithm>
#include <cmath>

#include "scfo/geometry.hpp"
#include "scfo/qp.hpp"

namespace scfo {

namespace {

GradientEstimate tighten(const GradientEstimate& g, double P) {
  GradientEstimate t = g;
  t.lower = g.estimate + P * (g.lower - g.estimate);
  t.upper = g.estimate + P * (g.upper - g.estimate);
  t.dtau = Band{g.dtau_estimate + P * (g.dtau.lo - g.dtau_estimate),
                g.dtau_estimate + P * (g.dtau.hi - g.dtau_estimate)};
  return t;
}

struct Activity {
  std::vector<int> experimental;
  std::vector<int> numerical;
};

// Epsilon-activity triggers: backed-off robust constraint values against
// -epsilon + d^{k+1}.
Activity active_constraints(const AdviceContext& ctx, int k_star,
                            const ProjectionParams& params) {
  Activity act;
  for (int j = 0; j < ctx.spec->n_gp; ++j) {
    const double lhs = backed_off_experimental(ctx, j, k_star);
    if (lhs >= -params.eps_p(j) + ctx.slack_next.d_g(j)) act.experimental.push_back(j);
  }
  for (int j = 0; j < ctx.spec->n_g(); ++j) {
    const double lhs = backed_off_numerical(ctx, j, k_star);
    if (lhs >= -params.eps_g(j) + ctx.slack_next.d_num(j)) act.numerical.push_back(j);
  }
  return act;
}

struct RowBuilder {
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  int n_vars;

  explicit RowBuilder(int n) : n_vars(n) {}
  void add(const VectorXd& row, double b) {
    rows.push_back(row);
    rhs.push_back(b);
  }
  MatrixXd A() const {
    MatrixXd m(static_cast<int>(rows.size()), n_vars);
    for (int r = 0; r < m.rows(); ++r) m.row(r) = rows[r].transpose();
    return m;
  }
  VectorXd b() const {
    VectorXd v(static_cast<int>(rhs.size()));
    for (int r = 0; r < v.size(); ++r) v(r) = rhs[r];
    return v;
  }
};

// Estimate-gradient projection rows over u only (the step-2 check).
void build_plain_rows(const AdviceContext& ctx, const ProjectionInputs& in,
                      const Activity& act, const ProjectionParams& params,
                      RowBuilder* rb) {
  const VectorXd& u_ref = ctx.rec(in.k_star).u;
  const int n = ctx.spec->n_u;
  for (int j : act.experimental) {
    const GradientEstimate* g = in.g_grads[j];
    rb->add(g->estimate, g->estimate.dot(u_ref) - params.delta_gp(j));
  }
  for (int j : act.numerical) {
    const VectorXd grad = ctx.spec->numerical_constraints[j].grad(u_ref);
    rb->add(grad, grad.dot(u_ref) - params.delta_g(j));
  }
  if (ctx.spec->cost_kind == CostKind::Experimental) {
    rb->add(in.cost_grad->estimate,
            in.cost_grad->estimate.dot(u_ref) - params.delta_phi);
  } else {
    const VectorXd grad = ctx.spec->numerical_cost->grad(u_ref);
    rb->add(grad, grad.dot(u_ref) - params.delta_phi);
  }
  (void)n;
}

// Slack-variable robust rows over (u, s): per robustified function f with
// tightened box [lo, hi], sum_i s_{fi} <= -delta_f and the two supporting
// inequalities lo_i (u_i - u_ref_i) <= s_{fi}, hi_i (u_i - u_ref_i) <= s_{fi}.
struct SlackLayout {
  int n_u = 0;
  int n_slack_groups = 0;
  int vars() const { return n_u + n_slack_groups * n_u; }
  int slack(int group, int i) const { return n_u + group * n_u + i; }
};

void add_box_group(const VectorXd& u_ref, const GradientEstimate& box, double delta,
                   int group, const SlackLayout& lay, RowBuilder* rb) {
  const int n = lay.n_u;
  VectorXd sum_row = VectorXd::Zero(lay.vars());
  for (int i = 0; i < n; ++i) sum_row(lay.slack(group, i)) = 1.0;
  rb->add(sum_row, -delta);
  for (int i = 0; i < n; ++i) {
    VectorXd lo_row = VectorXd::Zero(lay.vars());
    lo_row(i) = box.lower(i);
    lo_row(lay.slack(group, i)) = -1.0;
    rb->add(lo_row, box.lower(i) * u_ref(i));
    VectorXd hi_row = VectorXd::Zero(lay.vars());
    hi_row(i) = box.upper(i);
    hi_row(lay.slack(group, i)) = -1.0;
    rb->add(hi_row, box.upper(i) * u_ref(i));
  }
}

struct RobustSystem {
  MatrixXd A;
  VectorXd b;
  VectorXd lo, hi;
  SlackLayout layout;
};

RobustSystem build_robust_system(const AdviceContext& ctx, const ProjectionInputs& in,
                                 const Activity& act, const ProjectionParams& params,
                                 double P) {
  const VectorXd& u_ref = ctx.rec(in.k_star).u;
  const int n = ctx.spec->n_u;
  const bool cost_exp = ctx.spec->cost_kind == CostKind::Experimental;
  SlackLayout lay;
  lay.n_u = n;
  lay.n_slack_groups = static_cast<int>(act.experimental.size()) + (cost_exp ? 1 : 0);

  RowBuilder rb(lay.vars());
  int group = 0;
  for (int j : act.experimental)
    add_box_group(u_ref, tighten(*in.g_grads[j], P), params.delta_gp(j), group++, lay,
                  &rb);
  if (cost_exp)
    add_box_group(u_ref, tighten(*in.cost_grad, P), params.delta_phi, group++, lay, &rb);

  for (int j : act.numerical) {
    const VectorXd grad = ctx.spec->numerical_constraints[j].grad(u_ref);
    VectorXd row = VectorXd::Zero(lay.vars());
    row.head(n) = grad;
    rb.add(row, grad.dot(u_ref) - params.delta_g(j));
  }
  if (!cost_exp) {
    const VectorXd grad = ctx.spec->numerical_cost->grad(u_ref);
    VectorXd row = VectorXd::Zero(lay.vars());
    row.head(n) = grad;
    rb.add(row, grad.dot(u_ref) - params.delta_phi);
  }

  RobustSystem sys;
  sys.A = rb.A();
  sys.b = rb.b();
  sys.layout = lay;
  sys.lo = VectorXd::Constant(lay.vars(), -kInf);
  sys.hi = VectorXd::Constant(lay.vars(), kInf);
  sys.lo.head(n) = ctx.spec->u_lower.array() + ctx.delta_e;
  sys.hi.head(n) = ctx.spec->u_upper.array() - ctx.delta_e;
  return sys;
}

}  // namespace

ProjectionResult project_target(const AdviceContext& ctx, const ProjectionInputs& in) {
  ProjectionResult res;
  const VectorXd& u_ref = ctx.rec(in.k_star).u;
  const int n = ctx.spec->n_u;
  const bool cost_exp = ctx.spec->cost_kind == CostKind::Experimental;
  res.final_params = in.seeds;
  res.u_bar = u_ref;

  if (cost_exp && in.cost_grad == nullptr) {
    res.missing_gradient = true;
    res.gave_up = true;
    return res;
  }

  const VectorXd box_lo = ctx.spec->u_lower.array() + ctx.delta_e;
  const VectorXd box_hi = ctx.spec->u_upper.array() - ctx.delta_e;
  const double floor_phi = in.seeds.delta_phi / 1024.0;  // seed / 2^10

  // Step 2: shrink the projection parameters on the estimate-gradient
  // projection until it admits a point.
  ProjectionParams params = in.seeds;
  Activity act;
  bool feasible = false;
  for (;;) {
    act = active_constraints(ctx, in.k_star, params);
    bool missing = false;
    for (int j : act.experimental)
      if (in.g_grads[j] == nullptr) missing = true;
    if (missing) {
      res.missing_gradient = true;
      res.gave_up = true;
      res.final_params = params;
      return res;
    }
    RowBuilder rb(n);
    build_plain_rows(ctx, in, act, params, &rb);
    feasible = lp_feasible(rb.A(), rb.b(), box_lo, box_hi).feasible;
    if (feasible) break;
    if (params.delta_phi >= floor_phi) {
      params = params.halved();
      ++res.halvings;
      continue;
    }
    break;
  }
  res.final_params = params;
  if (params.delta_phi < floor_phi) {
    res.gave_up = true;
    return res;
  }

  // Step 3 short-circuit: degenerate boxes carry no robustness to add.
  bool degenerate = true;
  if (cost_exp && (in.cost_grad->upper - in.cost_grad->lower).lpNorm<Eigen::Infinity>() >
                      1e-15)
    degenerate = false;
  for (int j : act.experimental)
    if ((in.g_grads[j]->upper - in.g_grads[j]->lower).lpNorm<Eigen::Infinity>() > 1e-15)
      degenerate = false;

  double P_lo = 0.0, P_hi = 1.0;
  if (degenerate) {
    P_lo = 1.0;
  } else {
    while (P_hi - P_lo >= 0.01) {
      const double P = 0.5 * (P_lo + P_hi);
      RobustSystem sys = build_robust_system(ctx, in, act, params, P);
      if (lp_feasible(sys.A, sys.b, sys.lo, sys.hi).feasible)
        P_lo = P;
      else
        P_hi = P;
      ++res.bisections;
    }
    P_lo *= 0.5;
  }
  res.robustness = P_lo;

  RobustSystem sys = build_robust_system(ctx, in, act, params, P_lo);
  QpProblem qp;
  qp.q_diag = VectorXd::Zero(sys.layout.vars());
  qp.q_diag.head(n).setConstant(2.0);
  qp.linear = VectorXd::Zero(sys.layout.vars());
  qp.linear.head(n) = -2.0 * in.target;
  qp.A = sys.A;
  qp.b = sys.b;
  qp.x_lo = sys.lo;
  qp.x_hi = sys.hi;
  QpResult sol = solve_qp(qp);
  if (sol.status != QpStatus::Optimal) {
    res.solver_failed = true;
    res.gave_up = true;
    res.u_bar = u_ref;
    return res;
  }
  res.u_bar = sol.x.head(n);
  // Clamp residual box dust so downstream exact box checks hold.
  res.u_bar = res.u_bar.cwiseMax(box_lo).cwiseMin(box_hi);

  if (cost_exp) res.cost_box = tighten(*in.cost_grad, P_lo);
  res.g_boxes.resize(ctx.spec->n_gp);
  for (int j = 0; j < ctx.spec->n_gp; ++j)
    if (in.g_grads[j]) res.g_boxes[j] = tighten(*in.g_grads[j], P_lo);
  return res;
}

}  // namespace scfo
