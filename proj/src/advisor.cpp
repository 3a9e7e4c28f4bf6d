#include "scfo/advisor.hpp"

#include <algorithm>
#include <cmath>

#include "scfo/geometry.hpp"
#include "scfo/rng.hpp"

namespace scfo {

namespace {

// Clamp a gradient box into the global first-order intervals; both contain
// the true derivative, so the intersection does too and is tighter.
GradientEstimate clamp_box(const GradientEstimate& g, const FnConstants& global) {
  GradientEstimate out = g;
  for (int i = 0; i < g.estimate.size(); ++i) {
    out.lower(i) = std::max(g.lower(i), global.du_lo(i));
    out.upper(i) = std::min(g.upper(i), global.du_hi(i));
    if (out.lower(i) > out.upper(i)) {  // inconsistent inputs; keep the box
      out.lower(i) = g.lower(i);
      out.upper(i) = g.upper(i);
    }
  }
  out.dtau.lo = std::max(g.dtau.lo, global.dtau.lo);
  out.dtau.hi = std::min(g.dtau.hi, global.dtau.hi);
  if (out.dtau.lo > out.dtau.hi) out.dtau = g.dtau;
  return out;
}

}  // namespace

Advisor::Advisor(ProblemSpec spec, LipschitzSet lip, StructureInfo structure,
                 AdvisorConfig config, GradientOracle oracle)
    : spec_(std::move(spec)),
      lip_(std::move(lip)),
      structure_(std::move(structure)),
      config_(std::move(config)),
      oracle_(std::move(oracle)),
      adjusted_(lip_) {}

std::vector<std::string> Advisor::validate() const {
  std::vector<std::string> errors = validate_problem(spec_, lip_, structure_);
  auto more = validate_slack_policy(config_.slacks, spec_);
  errors.insert(errors.end(), more.begin(), more.end());
  more = validate_noise(config_.noise, spec_);
  errors.insert(errors.end(), more.begin(), more.end());
  if (config_.delta_e < 0) errors.push_back("delta_e must be >= 0");
  if (spec_.u_lower.size() == spec_.n_u) {
    const double width = (spec_.u_upper - spec_.u_lower).minCoeff();
    if (config_.delta_e >= 0.5 * width)
      errors.push_back("delta_e must be below half the smallest box width");
  }
  auto positive = [&errors](const VectorXd& v, const std::string& name) {
    for (int i = 0; i < v.size(); ++i)
      if (!(v(i) > 0)) errors.push_back(name + ": projection seeds must be positive");
  };
  positive(config_.seeds.eps_p, "eps_p");
  positive(config_.seeds.eps_g, "eps_g");
  positive(config_.seeds.delta_gp, "delta_gp");
  positive(config_.seeds.delta_g, "delta_g");
  if (!(config_.seeds.delta_phi > 0))
    errors.push_back("delta_phi: projection seeds must be positive");
  return errors;
}

void Advisor::refresh_gradients(const History& history) {
  const bool cost_exp = spec_.cost_kind == CostKind::Experimental;
  // A record whose cost measurement was invalidated (cost reset) also loses
  // its cached cost-gradient estimate: it described the old cost function.
  for (int k = 0; k < static_cast<int>(record_gradients_.size()); ++k)
    if (!history.record(k).cost_hat) record_gradients_[k].cost.reset();
  while (static_cast<int>(record_gradients_.size()) < history.size()) {
    const int k = static_cast<int>(record_gradients_.size());
    const Measurement& m = history.record(k);
    RecordGradients rg;
    if (oracle_) {
      if (cost_exp && m.cost_hat) {
        auto est = oracle_(FnId::cost(), m.u, m.time);
        if (est) rg.cost = clamp_box(*est, lip_.global(FnId::cost()));
      }
      rg.g.resize(spec_.n_gp);
      for (int j = 0; j < spec_.n_gp; ++j) {
        auto est = oracle_(FnId::g(j), m.u, m.time);
        if (est) rg.g[j] = clamp_box(*est, lip_.global(FnId::g(j)));
      }
    } else {
      rg.g.resize(spec_.n_gp);
    }
    record_gradients_.push_back(std::move(rg));
  }
}

void Advisor::run_consistency(const History& history) {
  if (consistency_length_ == history.size()) return;
  adjusted_ = lip_;
  consistency_length_ = history.size();
  if (!config_.run_consistency_checks) return;
  const bool cost_exp = spec_.cost_kind == CostKind::Experimental;

  for (int j = 0; j < spec_.n_gp; ++j) {
    auto conservative = conservative_intervals(history, FnId::g(j), spec_, config_.noise);
    FnConstants c = adjusted_.global(FnId::g(j));
    consistency_check_first_order(history, conservative, &c, config_.pretreat);
    adjusted_.g_lower.row(j) = c.du_lo.transpose();
    adjusted_.g_upper.row(j) = c.du_hi.transpose();
    adjusted_.g_time_lower(j) = c.dtau.lo;
    adjusted_.g_time_upper(j) = c.dtau.hi;
  }
  if (cost_exp) {
    auto conservative =
        conservative_intervals(history, FnId::cost(), spec_, config_.noise);
    FnConstants c = adjusted_.global(FnId::cost());
    consistency_check_first_order(history, conservative, &c, config_.pretreat);
    adjusted_.cost_lower = c.du_lo;
    adjusted_.cost_upper = c.du_hi;
    adjusted_.cost_time_lower = c.dtau.lo;
    adjusted_.cost_time_upper = c.dtau.hi;
    consistency_check_second_order(history, conservative, record_gradients_, c.dtau,
                                   &adjusted_.M_lower, &adjusted_.M_upper,
                                   config_.pretreat);
  }
}

VectorXd Advisor::default_target(const VectorXd& u_ref, const VectorXd& gradient) const {
  const double norm = gradient.norm();
  if (norm < 1e-14) return u_ref;
  const double lambda = (spec_.u_upper - spec_.u_lower).norm() / norm;
  VectorXd t = u_ref - lambda * gradient;
  return t.cwiseMax(spec_.u_lower).cwiseMin(spec_.u_upper);
}

Advice Advisor::advise(History& history, const SlackState& slack, double tau_next,
                       std::optional<double> tau_next2,
                       const std::optional<VectorXd>& external_target) {
  if (history.empty()) throw std::invalid_argument("advise: history is empty");
  const int count = history.size();
  const int k_now = count - 1;
  const bool cost_exp = spec_.cost_kind == CostKind::Experimental;
  Advice advice;

  // Pretreatment: consistency, then value intervals for all functions.
  refresh_gradients(history);
  run_consistency(history);
  history.g_intervals.assign(count, std::vector<ValueInterval>(spec_.n_gp));
  std::vector<ValueInterval> iv;
  for (int j = 0; j < spec_.n_gp; ++j) {
    compute_intervals(history, FnId::g(j), spec_, adjusted_, structure_, config_.noise,
                      record_gradients_, &iv, config_.pretreat);
    for (int k = 0; k < count; ++k) history.g_intervals[k][j] = iv[k];
  }
  if (cost_exp) {
    compute_intervals(history, FnId::cost(), spec_, adjusted_, structure_, config_.noise,
                      record_gradients_, &history.cost_intervals, config_.pretreat);
  } else {
    history.cost_intervals.assign(count, ValueInterval{});
  }

  // Slack update from the newest record's robust values.
  VectorXd g_upper(spec_.n_gp), g_num(spec_.n_g());
  for (int j = 0; j < spec_.n_gp; ++j) g_upper(j) = history.g_intervals[k_now][j].hi;
  for (int j = 0; j < spec_.n_g(); ++j)
    g_num(j) = spec_.numerical_constraints[j].eval(history.record(k_now).u);
  advice.slack_next = update_slacks(config_.slacks, slack, g_upper, g_num);

  AdviceContext ctx;
  ctx.history = &history;
  ctx.spec = &spec_;
  ctx.lip = &adjusted_;
  ctx.structure = &structure_;
  ctx.gradients = &record_gradients_;
  ctx.slack_next = advice.slack_next;
  ctx.delta_e = config_.delta_e;
  ctx.tau_next = tau_next;

  const ReferenceChoice ref = select_reference(ctx, config_.reference_fallback);
  advice.k_star = ref.k_star;
  advice.scenario.reference = ref.rule;
  if (!ref.primary_feasible)
    advice.warnings.push_back("no reference satisfies the backed-off conditions");
  const VectorXd u_ref = history.record(ref.k_star).u;

  // Gradient estimates extrapolated to the upcoming experiment time.
  std::optional<GradientEstimate> cost_next;
  std::vector<std::optional<GradientEstimate>> g_next(spec_.n_gp);
  if (oracle_) {
    if (cost_exp) {
      auto est = oracle_(FnId::cost(), u_ref, tau_next);
      if (est) cost_next = clamp_box(*est, lip_.global(FnId::cost()));
    }
    for (int j = 0; j < spec_.n_gp; ++j) {
      auto est = oracle_(FnId::g(j), u_ref, tau_next);
      if (est) g_next[j] = clamp_box(*est, lip_.global(FnId::g(j)));
    }
  }

  // Optimization target.
  VectorXd target;
  if (external_target) {
    target = external_target->cwiseMax(spec_.u_lower).cwiseMin(spec_.u_upper);
  } else if (cost_exp) {
    target = cost_next ? default_target(u_ref, cost_next->estimate) : u_ref;
  } else {
    target = default_target(u_ref, spec_.numerical_cost->grad(u_ref));
  }

  // Projection of the target (Algorithm 3F).
  ProjectionInputs pin;
  pin.k_star = ref.k_star;
  pin.target = target;
  pin.seeds = config_.seeds;
  pin.cost_grad = cost_next ? &*cost_next : nullptr;
  pin.g_grads.resize(spec_.n_gp, nullptr);
  for (int j = 0; j < spec_.n_gp; ++j)
    if (g_next[j]) pin.g_grads[j] = &*g_next[j];
  const ProjectionResult proj = project_target(ctx, pin);
  advice.final_params = proj.final_params;
  advice.robustness = proj.robustness;
  advice.projected_target = proj.u_bar;
  if (proj.missing_gradient)
    advice.warnings.push_back("projection skipped: missing gradient estimate");
  if (proj.solver_failed) advice.warnings.push_back("projection solver failed");

  // Filter gain.
  GainResult gain{0.0, LineSearchVariant::Zero};
  if (!proj.gave_up) {
    LineSearchOptions opts = config_.line_search;
    opts.tau_next2 = tau_next2;
    if (cost_exp) {
      Measurement span;
      span.u = proj.u_bar;
      span.time = tau_next;
      Region region = two_record_region(history.record(ref.k_star), span);
      auto [Mlo, Mhi] = local_M(adjusted_, region);
      gain = max_gain_search(ctx, ref.k_star, proj.u_bar, proj.cost_box, Mlo, Mhi, opts);
    } else {
      gain = min_cost_gain_search(ctx, ref.k_star, proj.u_bar, opts);
    }
  }
  advice.gain = gain.gain;
  advice.scenario.variant = gain.variant;

  VectorXd u_next = u_ref + gain.gain * (proj.u_bar - u_ref);

  // Sufficient-excitation override.
  if (config_.excitation_enabled && config_.delta_e > 0 &&
      (u_next - u_ref).norm() < config_.delta_e) {
    SplitRng rng(mix_seed(config_.rng_seed, mix_seed(0x657863697465ull, count)));
    u_next = excitation_override(u_next, u_ref, config_.delta_e, rng);
    advice.excitation_overridden = true;
    advice.scenario.excitation_override = true;
  }

  // The emitted point must lie in the experimental space; clip float dust and
  // flag anything larger (possible A2F breach at the caller's safe point).
  const VectorXd clipped = u_next.cwiseMax(spec_.u_lower).cwiseMin(spec_.u_upper);
  if ((clipped - u_next).lpNorm<Eigen::Infinity>() > 1e-9)
    advice.warnings.push_back("emitted point clipped into the box");
  advice.u_next = clipped;
  return advice;
}

Advice advise(History& history, const ProblemSpec& spec, const LipschitzSet& lip,
              const StructureInfo& structure, const AdvisorConfig& config,
              const GradientOracle& oracle, const SlackState& slack, double tau_next,
              std::optional<double> tau_next2,
              const std::optional<VectorXd>& external_target) {
  Advisor advisor(spec, lip, structure, config, oracle);
  auto errors = advisor.validate();
  if (!errors.empty()) throw std::invalid_argument("advise: " + errors.front());
  return advisor.advise(history, slack, tau_next, tau_next2, external_target);
}

}  // namespace scfo
