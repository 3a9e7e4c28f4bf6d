#include "scfo/scenario.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace scfo {

namespace {

std::uint64_t hash_doubles(std::uint64_t seed, const VectorXd& u, double tau,
                           std::uint64_t tag) {
  std::uint64_t h = mix_seed(seed, tag);
  for (int i = 0; i < u.size(); ++i)
    h = mix_seed(h, std::bit_cast<std::uint64_t>(u(i)));
  return mix_seed(h, std::bit_cast<std::uint64_t>(tau));
}

// Coarse deterministic range scan used only to seed the projection
// parameters (the algorithm wants rough function-range magnitudes).
struct PlantRanges {
  VectorXd g_min;      // per experimental constraint
  VectorXd g_num_min;  // per numerical constraint
  double cost_min = kInf;
};

PlantRanges scan_ranges(const Plant& plant) {
  PlantRanges r;
  r.g_min = VectorXd::Constant(plant.n_gp, kInf);
  r.g_num_min = VectorXd::Constant(static_cast<int>(plant.numerical.size()), kInf);
  const int steps = 41;
  for (int a = 0; a < steps; ++a)
    for (int b = 0; b < steps; ++b)
      for (double tau : {0.0, plant.tau_bar / 2, plant.tau_bar}) {
        VectorXd u(2);
        u << plant.u_lower(0) + (plant.u_upper(0) - plant.u_lower(0)) * a / (steps - 1),
            plant.u_lower(1) + (plant.u_upper(1) - plant.u_lower(1)) * b / (steps - 1);
        for (int j = 0; j < plant.n_gp; ++j)
          r.g_min(j) = std::min(r.g_min(j), plant.g[j](u, tau));
        for (std::size_t j = 0; j < plant.numerical.size(); ++j)
          r.g_num_min(j) = std::min(r.g_num_min(j), plant.numerical[j].eval(u));
        r.cost_min = std::min(r.cost_min, plant.cost(u, tau));
      }
  return r;
}

LipschitzSet bad_M_constants() {
  LipschitzSet lip;  // only the M blocks matter here
  lip.M_lower.resize(2, 2);
  lip.M_upper.resize(2, 2);
  lip.M_lower << 0.1, -2, -2, 0.1;
  lip.M_upper << 0.5, -1.5, -1.5, 0.5;
  return lip;
}

}  // namespace

ScenarioSetup prepare_scenario(const ScenarioConfig& cfg) {
  ScenarioSetup s;
  s.plant = builtin_plant(cfg.plant);
  s.spec = plant_problem(s.plant, cfg.cost_numerical);
  s.lip = s.plant.paper_constants;
  if (cfg.bad_M) {
    const LipschitzSet bad = bad_M_constants();
    s.lip.M_lower = bad.M_lower;
    s.lip.M_upper = bad.M_upper;
  }
  if (cfg.constants == "analytic-local") {
    const Plant plant_copy = s.plant;
    s.lip.local_provider = [plant_copy](FnId fn, const Region& r) {
      return polynomial_local_lipschitz(plant_copy, fn, r);
    };
    if (!cfg.bad_M) s.lip.local_M_provider = s.plant.analytic_local_M_provider;
  } else if (cfg.constants != "paper-global") {
    throw std::invalid_argument("constants must be paper-global or analytic-local");
  }
  s.structure = s.plant.structure;

  const int n_gp = s.plant.n_gp;
  const int n_g = static_cast<int>(s.plant.numerical.size());
  const int n_fn = (cfg.cost_numerical ? 0 : 1) + n_gp;

  AdvisorConfig& a = s.advisor;
  a.delta_e = cfg.delta_e;
  a.noise.kind = cfg.noise_kind;
  a.noise.sigma = VectorXd::Constant(n_fn, cfg.sigma);
  a.noise.mean = cfg.chebyshev_mean;
  a.noise.coverage = cfg.chebyshev_coverage;
  a.excitation_enabled = cfg.excitation;
  a.rng_seed = mix_seed(cfg.seed, 0xad0715ull);
  a.line_search.grid_points = cfg.grid_points;
  a.line_search.refine_steps = cfg.refine_steps;
  a.line_search.necessary_decrease_filter = cfg.necessary_decrease;
  a.run_consistency_checks = cfg.consistency_checks;
  a.pretreat.delta_r_min = cfg.delta_r_min;
  a.reference_fallback = cfg.reference_fallback == "minimax"
                             ? ReferenceFallback::Minimax
                             : ReferenceFallback::SafePointU0;

  SlackPolicy& sp = a.slacks;
  sp = SlackPolicy::none(n_gp, n_g);
  if (cfg.slack_max_g.size() > 0) sp.d_max_g = cfg.slack_max_g;
  if (cfg.slack_budget_g.size() > 0) sp.integral_budget_g = cfg.slack_budget_g;
  if (cfg.slack_max_num.size() > 0) sp.d_max_num = cfg.slack_max_num;
  if (cfg.slack_budget_num.size() > 0) sp.integral_budget_num = cfg.slack_budget_num;
  auto beta_from = [](const VectorXd& d_max, const VectorXd& budget) {
    VectorXd beta(d_max.size());
    for (int j = 0; j < d_max.size(); ++j)
      beta(j) = std::max(0.0, std::min((budget(j) - d_max(j)) / budget(j), 1.0 - 1e-12));
    return beta;
  };
  sp.beta_g = cfg.beta_g ? *cfg.beta_g : beta_from(sp.d_max_g, sp.integral_budget_g);
  sp.beta_num =
      cfg.beta_num ? *cfg.beta_num : beta_from(sp.d_max_num, sp.integral_budget_num);

  const PlantRanges ranges = scan_ranges(s.plant);
  ProjectionParams& seeds = a.seeds;
  seeds.eps_p.resize(n_gp);
  seeds.delta_gp.resize(n_gp);
  for (int j = 0; j < n_gp; ++j)
    seeds.eps_p(j) = seeds.delta_gp(j) = std::max(-ranges.g_min(j), 0.1);
  seeds.eps_g.resize(n_g);
  seeds.delta_g.resize(n_g);
  for (int j = 0; j < n_g; ++j)
    seeds.eps_g(j) = seeds.delta_g(j) = std::max(-ranges.g_num_min(j), 0.1);
  s.u0 = cfg.u0 ? *cfg.u0 : s.plant.default_u0;
  seeds.delta_phi = std::max(s.plant.cost(s.u0, 0.0) - ranges.cost_min, 0.1);

  // Artificial gradient estimator with substreams keyed per function and
  // query point, so repeated queries are reproducible.
  const Plant plant_copy = s.plant;
  const LipschitzSet lip_globals = s.plant.paper_constants;
  const double alpha = cfg.alpha_sigma;
  const std::uint64_t grad_seed = mix_seed(cfg.seed, 0x67726164ull);
  const bool cost_numerical = cfg.cost_numerical;
  s.oracle = [plant_copy, lip_globals, alpha, grad_seed, cost_numerical](
                 FnId fn, const VectorXd& u, double tau) -> std::optional<GradientEstimate> {
    if (fn.is_cost && cost_numerical) return std::nullopt;
    const std::uint64_t tag = fn.is_cost ? 0xc057ull : 0x9000ull + fn.constraint;
    SplitRng rng(hash_doubles(grad_seed, u, tau, tag));
    return artificial_gradient(plant_copy, fn, u, tau, alpha, lip_globals, rng);
  };
  return s;
}

Trajectory run_scenario(const ScenarioConfig& cfg) {
  ScenarioSetup s = prepare_scenario(cfg);
  Advisor advisor(s.spec, s.lip, s.structure, s.advisor, s.oracle);
  {
    auto errors = advisor.validate();
    if (!errors.empty())
      throw std::invalid_argument("scenario validation: " + errors.front());
  }

  Trajectory out;
  const int n_gp = s.plant.n_gp;
  const int n_g = static_cast<int>(s.plant.numerical.size());
  out.violation_integral_g = VectorXd::Zero(n_gp);
  out.violation_integral_num = VectorXd::Zero(n_g);

  History history;
  SlackState slack = SlackState::initial(s.advisor.slacks);
  VectorXd u = s.u0;
  SplitRng measure_root(mix_seed(cfg.seed, 0x6d656173ull));
  const bool is_switching = cfg.plant == "switching";

  for (int k = 0; k < cfg.iterations; ++k) {
    const double tau = static_cast<double>(k);
    SplitRng mrng = measure_root.split(k);
    history.append(
        measure(s.plant, u, tau, s.advisor.noise, cfg.cost_numerical, mrng));
    if (is_switching && k == 51) history.invalidate_cost_before(51);

    Advice advice = advisor.advise(history, slack, tau + 1.0, tau + 2.0);
    for (const auto& w : advice.warnings) {
      if (out.warnings.size() < 200) out.warnings.push_back(w);
    }

    TrajectoryRow row;
    row.k = k;
    row.tau = tau;
    row.u = u;
    row.cost_true = s.plant.cost(u, tau);
    row.cost_meas = history.record(k).cost_hat;
    row.g_true.resize(n_gp);
    for (int j = 0; j < n_gp; ++j) {
      row.g_true(j) = s.plant.g[j](u, tau);
      out.violation_integral_g(j) += std::max(0.0, row.g_true(j));
    }
    row.g_num_true.resize(n_g);
    for (int j = 0; j < n_g; ++j) {
      row.g_num_true(j) = s.plant.numerical[j].eval(u);
      out.violation_integral_num(j) += std::max(0.0, row.g_num_true(j));
    }
    row.d_g = slack.d_g;
    row.d_num = slack.d_num;
    row.gain = advice.gain;
    row.k_star = advice.k_star;
    row.scenario = advice.scenario.label();
    row.robustness = advice.robustness;
    out.rows.push_back(std::move(row));

    slack = advice.slack_next;
    u = advice.u_next;
    out.final_cost_true = out.rows.back().cost_true;
  }
  return out;
}

}  // namespace scfo
