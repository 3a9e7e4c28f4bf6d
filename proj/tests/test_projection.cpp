#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>

#include "fixtures.hpp"
#include "scfo/projection.hpp"
#include "scfo/qp.hpp"
#include "scfo/rng.hpp"

using namespace scfo;
using namespace scfo::testfix;

namespace {

// Synthetic projection instance on a random box problem with one record.
struct Instance {
  ContextFixture fix;
  ProjectionInputs in;
  GradientEstimate cost_box;
  std::vector<GradientEstimate> g_boxes;
};

GradientEstimate random_box(SplitRng& rng, int n, double spread) {
  GradientEstimate g;
  g.estimate.resize(n);
  g.lower.resize(n);
  g.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    g.estimate(i) = 2.0 * rng.uniform_pm();
    const double lo = spread * rng.uniform(), hi = spread * rng.uniform();
    g.lower(i) = g.estimate(i) - lo;
    g.upper(i) = g.estimate(i) + hi;
  }
  g.dtau = Band{0, 0};
  return g;
}

Instance make_instance(SplitRng& rng, int n_u, int n_gp, double spread) {
  Instance inst;
  ContextFixture& f = inst.fix;
  f.spec.n_u = n_u;
  f.spec.u_lower = VectorXd::Constant(n_u, -1.0);
  f.spec.u_upper = VectorXd::Constant(n_u, 1.0);
  f.spec.n_gp = n_gp;
  f.lip.g_lower = MatrixXd::Constant(n_gp, n_u, -5.0);
  f.lip.g_upper = MatrixXd::Constant(n_gp, n_u, 5.0);
  f.lip.g_time_lower = VectorXd::Zero(n_gp);
  f.lip.g_time_upper = VectorXd::Zero(n_gp);
  f.lip.cost_lower = VectorXd::Constant(n_u, -5.0);
  f.lip.cost_upper = VectorXd::Constant(n_u, 5.0);
  f.lip.M_lower = MatrixXd::Constant(n_u, n_u, -1.0);
  f.lip.M_upper = MatrixXd::Constant(n_u, n_u, 1.0);
  f.structure.conc_g.resize(n_gp);
  f.slack = SlackState::initial(SlackPolicy::none(n_gp, 0));

  Measurement m;
  m.u = VectorXd::Zero(n_u);
  for (int i = 0; i < n_u; ++i) m.u(i) = 0.4 * rng.uniform_pm();
  m.time = 0.0;
  m.cost_hat = 1.0;
  m.g_hat = VectorXd::Constant(n_gp, -0.05);  // near-active
  f.history.append(m);
  f.history.cost_intervals.push_back(ValueInterval{1.0, 1.0});
  std::vector<ValueInterval> gi(n_gp);
  for (int j = 0; j < n_gp; ++j) gi[j] = ValueInterval{-0.06, -0.05};
  f.history.g_intervals.push_back(gi);
  RecordGradients rg;
  rg.g.resize(n_gp);
  f.gradients.push_back(rg);

  inst.cost_box = random_box(rng, n_u, spread);
  for (int j = 0; j < n_gp; ++j) inst.g_boxes.push_back(random_box(rng, n_u, spread));

  ProjectionInputs& in = inst.in;
  in.k_star = 0;
  in.target.resize(n_u);
  for (int i = 0; i < n_u; ++i) in.target(i) = rng.uniform_pm();
  in.seeds.eps_p = VectorXd::Constant(n_gp, 0.5);
  in.seeds.eps_g = VectorXd(0);
  in.seeds.delta_gp = VectorXd::Constant(n_gp, 0.1);
  in.seeds.delta_g = VectorXd(0);
  in.seeds.delta_phi = 0.2;
  in.cost_grad = &inst.cost_box;
  for (int j = 0; j < n_gp; ++j) in.g_grads.push_back(&inst.g_boxes[j]);
  return inst;
}

// Every vertex realization of the tightened boxes must be satisfied by the
// returned point (Lemma-2 equivalence direction checked numerically).
int vertex_violations(const VectorXd& u, const VectorXd& u_ref,
                      const GradientEstimate& box, double delta, double tol) {
  const int n = static_cast<int>(u.size());
  int bad = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double lhs = 0;
    for (int i = 0; i < n; ++i) {
      const double slope = (mask & (1u << i)) ? box.upper(i) : box.lower(i);
      lhs += slope * (u(i) - u_ref(i));
    }
    if (lhs > -delta + tol) ++bad;
  }
  return bad;
}

}  // namespace

TEST_CASE("feasible target is returned unchanged with near-full robustness") {
  SplitRng rng(101);
  ContextFixture f = plant_fixture("static");
  f.add_exact_record(vec2(0.2, 0.3), 0.0);
  // Interior reference far from every constraint: only the cost plane binds.
  GradientEstimate cost_box;
  cost_box.estimate = vec2(-1.0, -0.4);
  cost_box.lower = vec2(-1.2, -0.6);
  cost_box.upper = vec2(-0.8, -0.2);
  cost_box.dtau = Band{0, 0};
  ProjectionInputs in;
  in.k_star = 0;
  in.target = vec2(0.3, 0.35);  // descent direction for every box vertex
  in.seeds.eps_p = vec2(0.02, 0.02);  // small epsilon: no constraint activity
  in.seeds.eps_g = VectorXd::Constant(1, 0.02);
  in.seeds.delta_gp = vec2(0.01, 0.01);
  in.seeds.delta_g = VectorXd::Constant(1, 0.01);
  in.seeds.delta_phi = 0.01;
  in.cost_grad = &cost_box;
  in.g_grads = {nullptr, nullptr};

  auto res = project_target(f.ctx(0.0, 1.0), in);
  REQUIRE(!res.gave_up);
  CHECK((res.u_bar - in.target).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(res.robustness >= 0.99 * 0.5);  // P_lo >= 0.99, halved at the end
  CHECK(res.bisections <= 8);
}

TEST_CASE("sign-spanning cost box forces P below one but keeps tightened descent") {
  ContextFixture f = plant_fixture("static");
  f.add_exact_record(vec2(0.0, 0.2), 0.0);
  GradientEstimate cost_box;
  cost_box.estimate = vec2(-0.5, 0.1);
  cost_box.lower = vec2(-1.5, -0.7);
  cost_box.upper = vec2(0.5, 0.9);  // spans zero in both components
  cost_box.dtau = Band{0, 0};
  ProjectionInputs in;
  in.k_star = 0;
  in.target = vec2(0.4, 0.1);
  in.seeds.eps_p = vec2(0.1, 0.1);
  in.seeds.eps_g = VectorXd::Constant(1, 0.1);
  in.seeds.delta_gp = vec2(0.05, 0.05);
  in.seeds.delta_g = VectorXd::Constant(1, 0.05);
  in.seeds.delta_phi = 0.05;
  in.cost_grad = &cost_box;
  in.g_grads = {nullptr, nullptr};

  auto res = project_target(f.ctx(0.0, 1.0), in);
  REQUIRE(!res.gave_up);
  CHECK(res.robustness < 1.0);
  // Tightened-box descent holds at the returned point.
  double worst = -kInf;
  for (int i = 0; i < 2; ++i) {
    const double d = res.u_bar(i) - f.history.record(0).u(i);
    worst = std::max(worst, std::max(res.cost_box.lower(i) * d, res.cost_box.upper(i) * d));
  }
  (void)worst;
  CHECK(vertex_violations(res.u_bar, f.history.record(0).u, res.cost_box,
                          res.final_params.delta_phi, 1e-8) == 0);
}

TEST_CASE("projection floor returns the reference point") {
  ContextFixture f = plant_fixture("static");
  // Numerical constraint with zero gradient at the reference and nonnegative
  // ball max: permanently active, never satisfiable.
  SeparableQuadratic stuck;
  stuck.quad = vec2(1.0, 0.0);
  stuck.lin = vec2(0.0, 0.0);
  stuck.constant = 0.0;
  f.spec.numerical_constraints = {make_separable_constraint(stuck)};
  f.add_exact_record(vec2(0.0, 0.2), 0.0);

  GradientEstimate cost_box;
  cost_box.estimate = vec2(-1.0, 0.0);
  cost_box.lower = cost_box.estimate;
  cost_box.upper = cost_box.estimate;
  cost_box.dtau = Band{0, 0};
  ProjectionInputs in;
  in.k_star = 0;
  in.target = vec2(0.4, 0.2);
  in.seeds.eps_p = vec2(0.1, 0.1);
  in.seeds.eps_g = VectorXd::Constant(1, 0.1);
  in.seeds.delta_gp = vec2(0.05, 0.05);
  in.seeds.delta_g = VectorXd::Constant(1, 0.05);
  in.seeds.delta_phi = 0.05;
  in.cost_grad = &cost_box;
  in.g_grads = {nullptr, nullptr};

  auto res = project_target(f.ctx(0.0, 1.0), in);
  CHECK(res.gave_up);
  CHECK((res.u_bar - f.history.record(0).u).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(res.halvings <= 11);
}

TEST_CASE("slack-QP solutions satisfy every gradient-box vertex constraint") {
  SplitRng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_u = 2 + static_cast<int>(rng.uniform() * 3);  // 2..4
    const int n_gp = 1 + static_cast<int>(rng.uniform() * 2);
    Instance inst = make_instance(rng, n_u, n_gp, 0.8);
    auto res = project_target(inst.fix.ctx(0.0, 1.0), inst.in);
    if (res.gave_up) continue;
    ++checked;
    const VectorXd& u_ref = inst.fix.history.record(0).u;
    CHECK(vertex_violations(res.u_bar, u_ref, res.cost_box,
                            res.final_params.delta_phi, 1e-8) == 0);
    for (int j = 0; j < n_gp; ++j) {
      // Only epsilon-active constraints are enforced; with these seeds all
      // near-active constraints trigger at full epsilon.
      const double act = backed_off_experimental(inst.fix.ctx(0.0, 1.0), j, 0);
      if (act >= -res.final_params.eps_p(j))
        CHECK(vertex_violations(res.u_bar, u_ref, res.g_boxes[j],
                                res.final_params.delta_gp(j), 1e-8) == 0);
    }
  }
  CHECK(checked >= 150);
}

TEST_CASE("projection matches an active-set enumeration oracle") {
  // Small sizes keep the exponential oracle tractable: the slack QP itself is
  // enumerated, not the production path.
  SplitRng rng(78);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n_u = 2;
    const int n_gp = 1;
    Instance inst = make_instance(rng, n_u, n_gp, 0.6);
    auto res = project_target(inst.fix.ctx(0.0, 1.0), inst.in);
    if (res.gave_up) continue;

    // Rebuild the final QP exactly as solved: robust rows for the cost and
    // the active constraint, full boxes tightened by the final P.
    const VectorXd& u_ref = inst.fix.history.record(0).u;
    const double P = res.robustness;
    auto tightened = [&](const GradientEstimate& g) {
      GradientEstimate t = g;
      t.lower = g.estimate + P * (g.lower - g.estimate);
      t.upper = g.estimate + P * (g.upper - g.estimate);
      return t;
    };
    std::vector<GradientEstimate> groups;
    const double act = backed_off_experimental(inst.fix.ctx(0.0, 1.0), 0, 0);
    if (act >= -res.final_params.eps_p(0)) groups.push_back(tightened(inst.g_boxes[0]));
    groups.push_back(tightened(inst.cost_box));
    std::vector<double> deltas;
    if (groups.size() == 2) deltas = {res.final_params.delta_gp(0),
                                      res.final_params.delta_phi};
    else
      deltas = {res.final_params.delta_phi};

    const int gcount = static_cast<int>(groups.size());
    const int vars = n_u + gcount * n_u;
    QpProblem qp;
    qp.q_diag = VectorXd::Zero(vars);
    qp.q_diag.head(n_u).setConstant(2.0);
    qp.linear = VectorXd::Zero(vars);
    qp.linear.head(n_u) = -2.0 * inst.in.target;
    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    for (int g = 0; g < gcount; ++g) {
      VectorXd sum = VectorXd::Zero(vars);
      for (int i = 0; i < n_u; ++i) sum(n_u + g * n_u + i) = 1.0;
      rows.push_back(sum);
      rhs.push_back(-deltas[g]);
      for (int i = 0; i < n_u; ++i) {
        VectorXd lo = VectorXd::Zero(vars), hi = VectorXd::Zero(vars);
        lo(i) = groups[g].lower(i);
        lo(n_u + g * n_u + i) = -1;
        rows.push_back(lo);
        rhs.push_back(groups[g].lower(i) * u_ref(i));
        hi(i) = groups[g].upper(i);
        hi(n_u + g * n_u + i) = -1;
        rows.push_back(hi);
        rhs.push_back(groups[g].upper(i) * u_ref(i));
      }
    }
    qp.A.resize(static_cast<int>(rows.size()), vars);
    qp.b.resize(static_cast<int>(rows.size()));
    for (int r = 0; r < qp.A.rows(); ++r) {
      qp.A.row(r) = rows[r].transpose();
      qp.b(r) = rhs[r];
    }
    qp.x_lo = VectorXd::Constant(vars, -kInf);
    qp.x_hi = VectorXd::Constant(vars, kInf);
    qp.x_lo.head(n_u) = inst.fix.spec.u_lower;
    qp.x_hi.head(n_u) = inst.fix.spec.u_upper;

    // Oracle: enumerate active sets of the KKT system directly.
    const int m = static_cast<int>(rows.size()) + 2 * vars;
    if (m > 24) continue;
    // Build expanded rows including box faces for enumeration.
    std::vector<VectorXd> all_rows = rows;
    std::vector<double> all_rhs = rhs;
    for (int i = 0; i < vars; ++i) {
      if (qp.x_hi(i) < kInf) {
        VectorXd e = VectorXd::Zero(vars);
        e(i) = 1;
        all_rows.push_back(e);
        all_rhs.push_back(qp.x_hi(i));
      }
      if (qp.x_lo(i) > -kInf) {
        VectorXd e = VectorXd::Zero(vars);
        e(i) = -1;
        all_rows.push_back(e);
        all_rhs.push_back(-qp.x_lo(i));
      }
    }
    const int rows_n = static_cast<int>(all_rows.size());
    VectorXd best_u;
    double best_obj = kInf;
    for (unsigned mask = 0; mask < (1u << rows_n); ++mask) {
      if (__builtin_popcount(mask) > vars) continue;
      std::vector<int> act_rows;
      for (int r = 0; r < rows_n; ++r)
        if (mask & (1u << r)) act_rows.push_back(r);
      const int na = static_cast<int>(act_rows.size());
      MatrixXd K = MatrixXd::Zero(vars + na, vars + na);
      for (int i = 0; i < vars; ++i) K(i, i) = std::max(qp.q_diag(i), 1e-9);
      for (int a = 0; a < na; ++a) {
        K.block(0, vars + a, vars, 1) = all_rows[act_rows[a]];
        K.block(vars + a, 0, 1, vars) = all_rows[act_rows[a]].transpose();
      }
      VectorXd r(vars + na);
      r.head(vars) = -qp.linear;
      for (int a = 0; a < na; ++a) r(vars + a) = all_rhs[act_rows[a]];
      Eigen::FullPivLU<MatrixXd> lu(K);
      if (!lu.isInvertible()) continue;
      VectorXd sol = lu.solve(r);
      bool ok = true;
      for (int rr = 0; rr < rows_n && ok; ++rr)
        if (all_rows[rr].dot(sol.head(vars)) > all_rhs[rr] + 1e-8) ok = false;
      for (int a = 0; a < na && ok; ++a)
        if (sol(vars + a) < -1e-8) ok = false;
      if (!ok) continue;
      const VectorXd x = sol.head(vars);
      const double obj =
          0.5 * x.dot((qp.q_diag.array() * x.array()).matrix()) + qp.linear.dot(x);
      if (obj < best_obj - 1e-12) {
        best_obj = obj;
        best_u = x.head(n_u);
      }
    }
    if (best_u.size() == 0) continue;
    ++compared;
    CHECK((res.u_bar - best_u).lpNorm<Eigen::Infinity>() < 1e-6);
  }
  CHECK(compared >= 30);
}
