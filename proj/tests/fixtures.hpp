#ifndef SCFO_TESTS_FIXTURES_HPP
#define SCFO_TESTS_FIXTURES_HPP

#include <optional>
#include <vector>

#include "scfo/advisor.hpp"
#include "scfo/reference.hpp"
#include "scfo/simharness.hpp"

namespace scfo::testfix {

inline VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

// Exact gradient oracle for a plant (degenerate boxes).
inline GradientOracle exact_oracle(const Plant& plant) {
  return [plant](FnId fn, const VectorXd& u,
                 double tau) -> std::optional<GradientEstimate> {
    GradientEstimate ge;
    ge.at_u = u;
    ge.at_tau = tau;
    if (fn.is_cost) {
      ge.estimate = plant.cost_grad_u(u, tau);
      ge.dtau_estimate = plant.cost_grad_tau(u, tau);
    } else {
      ge.estimate = plant.g_grad_u[fn.constraint](u, tau);
      ge.dtau_estimate = plant.g_grad_tau[fn.constraint](u, tau);
    }
    ge.lower = ge.estimate;
    ge.upper = ge.estimate;
    ge.dtau = Band{ge.dtau_estimate, ge.dtau_estimate};
    return ge;
  };
}

// Owns the pieces an AdviceContext points into.
struct ContextFixture {
  ProblemSpec spec;
  LipschitzSet lip;
  StructureInfo structure;
  History history;
  std::vector<RecordGradients> gradients;
  SlackState slack;
  Plant plant;
  bool has_plant = false;

  AdviceContext ctx(double delta_e, double tau_next) {
    AdviceContext c;
    c.history = &history;
    c.spec = &spec;
    c.lip = &lip;
    c.structure = &structure;
    c.gradients = &gradients;
    c.slack_next = slack;
    c.delta_e = delta_e;
    c.tau_next = tau_next;
    return c;
  }

  // Appends a noise-free record measured on the plant, with exact value
  // intervals and exact gradient boxes.
  void add_exact_record(const VectorXd& u, double tau) {
    Measurement m;
    m.u = u;
    m.time = tau;
    m.cost_hat = plant.cost(u, tau);
    m.g_hat.resize(plant.n_gp);
    for (int j = 0; j < plant.n_gp; ++j) m.g_hat(j) = plant.g[j](u, tau);
    history.append(m);
    history.cost_intervals.push_back(ValueInterval{*m.cost_hat, *m.cost_hat});
    std::vector<ValueInterval> gi(plant.n_gp);
    for (int j = 0; j < plant.n_gp; ++j) gi[j] = ValueInterval{m.g_hat(j), m.g_hat(j)};
    history.g_intervals.push_back(gi);
    RecordGradients rg;
    auto oracle = exact_oracle(plant);
    rg.cost = oracle(FnId::cost(), u, tau);
    rg.g.resize(plant.n_gp);
    for (int j = 0; j < plant.n_gp; ++j) rg.g[j] = oracle(FnId::g(j), u, tau);
    gradients.push_back(rg);
  }
};

inline ContextFixture plant_fixture(const std::string& name) {
  ContextFixture f;
  f.plant = builtin_plant(name);
  f.has_plant = true;
  f.spec = plant_problem(f.plant, false);
  f.lip = f.plant.paper_constants;
  f.structure = f.plant.structure;
  f.slack = SlackState::initial(SlackPolicy::none(f.plant.n_gp, 1));
  return f;
}

}  // namespace scfo::testfix

#endif  // SCFO_TESTS_FIXTURES_HPP
