#include "scfo/stepper.hpp"

#include <algorithm>
#include <cmath>

#include "scfo/geometry.hpp"

namespace scfo {

namespace {

// Precomputed per-record data for evaluating min/max Lipschitz envelopes
// along the segment u(K) = u_ref + K step.
struct EnvelopeTerm {
  double base = 0.0;       // value bound plus degradation extrapolation
  std::vector<Band> bands; // per-dimension slope band (gradient box or kappa)
  VectorXd anchor;         // u_kbar
};

struct Envelope {
  std::vector<EnvelopeTerm> terms;
  VectorXd u_ref, step;
  bool upper = true;  // true: per-term max products and min over records

  double eval(double K) const {
    double best = upper ? kInf : -kInf;
    const VectorXd u = u_ref + K * step;
    for (const auto& t : terms) {
      double v = t.base;
      for (int i = 0; i < u.size(); ++i) {
        const double z = u(i) - t.anchor(i);
        v += upper ? band_max(t.bands[i], z) : band_min(t.bands[i], z);
      }
      best = upper ? std::min(best, v) : std::max(best, v);
    }
    return best;
  }
};

// Envelope of the upper bound on g_j(u(K), tau_next) over all records.
Envelope build_feasibility_envelope(const AdviceContext& ctx, int j, int k_star,
                                    const VectorXd& u_bar) {
  Envelope env;
  env.upper = true;
  env.u_ref = ctx.rec(k_star).u;
  env.step = u_bar - env.u_ref;
  const int n = ctx.spec->n_u;
  Measurement span;  // synthetic record spanning the step targets
  span.u = u_bar;
  span.time = ctx.tau_next;

  for (int k = 0; k < ctx.count(); ++k) {
    const double g_hi = ctx.history->g_intervals[k][j].hi;
    if (!(g_hi < kInf)) continue;
    const Measurement& m = ctx.rec(k);
    Region region = two_record_region(m, span);
    region = region.merged(Region::point(env.u_ref, ctx.tau_next));
    region.t_lo = std::min(region.t_lo, std::min(m.time, ctx.rec(k_star).time));
    const FnConstants local = local_constants(*ctx.lip, FnId::g(j), region);
    const IndexSetFlag conc = ctx.structure->local(FnId::g(j), false, region);
    const GradientEstimate* ge = ctx.grad(k, FnId::g(j));
    const double dt = ctx.tau_next - m.time;

    EnvelopeTerm term;
    term.anchor = m.u;
    term.base = g_hi + ((conc.eta && ge) ? ge->dtau.hi * dt : local.dtau.hi * dt);
    term.bands.resize(n);
    for (int i = 0; i < n; ++i) {
      if (ge && conc.contains(i))
        term.bands[i] = Band{ge->lower(i), ge->upper(i)};
      else
        term.bands[i] = Band{local.du_lo(i), local.du_hi(i)};
    }
    env.terms.push_back(std::move(term));
  }
  return env;
}

// Envelope of the lower bound on phi(u(K), tau_next): the left-hand side of
// the necessary-decrease filter.
Envelope build_cost_lower_envelope(const AdviceContext& ctx, int k_star,
                                   const VectorXd& u_bar) {
  Envelope env;
  env.upper = false;
  env.u_ref = ctx.rec(k_star).u;
  env.step = u_bar - env.u_ref;
  const int n = ctx.spec->n_u;
  Measurement span;
  span.u = u_bar;
  span.time = ctx.tau_next;

  for (int k = 0; k < ctx.count(); ++k) {
    const double lo = ctx.history->cost_intervals[k].lo;
    if (!(lo > -kInf)) continue;
    const Measurement& m = ctx.rec(k);
    Region region = two_record_region(m, span);
    region = region.merged(Region::point(env.u_ref, ctx.tau_next));
    region.t_lo = std::min(region.t_lo, std::min(m.time, ctx.rec(k_star).time));
    const FnConstants local = local_constants(*ctx.lip, FnId::cost(), region);
    const IndexSetFlag conv = ctx.structure->local(FnId::cost(), true, region);
    const GradientEstimate* ge = ctx.grad(k, FnId::cost());
    const double dt = ctx.tau_next - m.time;

    EnvelopeTerm term;
    term.anchor = m.u;
    term.base = lo + ((conv.eta && ge) ? ge->dtau.lo * dt : local.dtau.lo * dt);
    term.bands.resize(n);
    for (int i = 0; i < n; ++i) {
      if (ge && conv.contains(i))
        term.bands[i] = Band{ge->lower(i), ge->upper(i)};
      else
        term.bands[i] = Band{local.du_lo(i), local.du_hi(i)};
    }
    env.terms.push_back(std::move(term));
  }
  return env;
}

// Right-hand side of the necessary-decrease filter: the tightest robust
// upper bound on phi(u_ref, tau_next) over all records. K-independent.
double cost_upper_at_ref(const AdviceContext& ctx, int k_star) {
  const VectorXd& u_ref = ctx.rec(k_star).u;
  double best = kInf;
  for (int k = 0; k < ctx.count(); ++k) {
    const double hi = ctx.history->cost_intervals[k].hi;
    if (!(hi < kInf)) continue;
    const Measurement& m = ctx.rec(k);
    Measurement ref_pt;
    ref_pt.u = u_ref;
    ref_pt.time = ctx.tau_next;
    const Region region = two_record_region(m, ref_pt);
    const FnConstants local = local_constants(*ctx.lip, FnId::cost(), region);
    const IndexSetFlag conc = ctx.structure->local(FnId::cost(), false, region);
    const GradientEstimate* ge = ctx.grad(k, FnId::cost());
    const double dt = ctx.tau_next - m.time;
    double v = hi + ((conc.eta && ge) ? ge->dtau.hi * dt : local.dtau.hi * dt);
    for (int i = 0; i < ctx.spec->n_u; ++i) {
      const double z = u_ref(i) - m.u(i);
      if (ge && conc.contains(i))
        v += band_max(Band{ge->lower(i), ge->upper(i)}, z);
      else
        v += band_max(Band{local.du_lo(i), local.du_hi(i)}, z);
    }
    best = std::min(best, v);
  }
  return best;
}

// Excitation back-off at gain K: degradation to tau_next2 plus the ball term,
// evaluated with local constants around the landing point. Concave-index
// boxes are not used here (I^K empty) to keep the search estimator-free.
double excitation_backoff(const AdviceContext& ctx, int j, const VectorXd& u_at_k,
                          double tau_next2,
                          const LineSearchOptions& opts) {
  const Region region =
      ball_region(*ctx.spec, u_at_k, ctx.delta_e, ctx.tau_next, tau_next2);
  const FnConstants local = local_constants(*ctx.lip, FnId::g(j), region);
  const double dt = tau_next2 - ctx.tau_next;
  double deg = local.dtau.hi * dt;
  if (opts.future_time_derivative) {
    const IndexSetFlag conc = ctx.structure->local(FnId::g(j), false, region);
    if (conc.eta) {
      auto band = opts.future_time_derivative(j, u_at_k);
      if (band) deg = band->hi * dt;
    }
  }
  VectorXd km(ctx.spec->n_u);
  for (int i = 0; i < ctx.spec->n_u; ++i)
    km(i) = std::max(std::abs(local.du_lo(i)), std::abs(local.du_hi(i)));
  return deg + ctx.delta_e * km.norm();
}

struct SearchProblem {
  std::vector<Envelope> feasibility;  // per experimental constraint
  std::optional<Envelope> cost_lower; // necessary-decrease LHS
  double cost_upper_ref = kInf;       // necessary-decrease RHS
  double sd_const = 0.0, sd_slope = 0.0;  // sufficient decrease: c0 + K c1 <= 0
  bool use_sufficient = false;
  bool use_necessary = false;
};

enum class ExcitationMode { Full, BallOnly, None };

bool gain_feasible(const AdviceContext& ctx, const SearchProblem& sp, int k_star,
                   const VectorXd& u_bar, double K, ExcitationMode mode,
                   const LineSearchOptions& opts) {
  const VectorXd u_at_k = ctx.rec(k_star).u + K * (u_bar - ctx.rec(k_star).u);
  for (int j = 0; j < ctx.spec->n_gp; ++j) {
    const double margin = sp.feasibility[j].eval(K);
    if (margin > ctx.slack_next.d_g(j) + 1e-12) return false;
    if (mode != ExcitationMode::None) {
      double extra;
      if (mode == ExcitationMode::Full)
        extra = excitation_backoff(ctx, j, u_at_k, *opts.tau_next2, opts);
      else {  // ball term only, no future degradation
        const Region region =
            ball_region(*ctx.spec, u_at_k, ctx.delta_e, ctx.tau_next, ctx.tau_next);
        const FnConstants local = local_constants(*ctx.lip, FnId::g(j), region);
        VectorXd km(ctx.spec->n_u);
        for (int i = 0; i < ctx.spec->n_u; ++i)
          km(i) = std::max(std::abs(local.du_lo(i)), std::abs(local.du_hi(i)));
        extra = ctx.delta_e * km.norm();
      }
      if (margin + extra > ctx.slack_next.d_g(j) + 1e-12) return false;
    }
  }
  for (int j = 0; j < ctx.spec->n_g(); ++j) {
    if (ctx.spec->numerical_constraints[j].ball_max(u_at_k, ctx.delta_e) >
        ctx.slack_next.d_num(j) + 1e-12)
      return false;
  }
  if (sp.use_sufficient && sp.sd_const + K * sp.sd_slope > 1e-12) return false;
  if (sp.use_necessary && sp.cost_lower &&
      sp.cost_lower->eval(K) > sp.cost_upper_ref + 1e-12)
    return false;
  return true;
}

std::optional<double> search_max_gain(const AdviceContext& ctx, const SearchProblem& sp,
                                      int k_star, const VectorXd& u_bar,
                                      ExcitationMode mode, const LineSearchOptions& opts) {
  auto feasible = [&](double K) {
    return gain_feasible(ctx, sp, k_star, u_bar, K, mode, opts);
  };
  const int n = opts.grid_points;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double K = static_cast<double>(i) / (n - 1);
    if (feasible(K)) best = K;
  }
  if (best < 0) return std::nullopt;
  // The feasible set is a finite union of intervals; the supremum lies within
  // one grid step of the best feasible grid point. Bisect on feasibility.
  double lo = best, hi = std::min(1.0, best + 1.0 / (n - 1));
  for (int it = 0; it < opts.refine_steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

double feasibility_margin(const AdviceContext& ctx, int j, double K, int k_star,
                          const VectorXd& u_bar) {
  return build_feasibility_envelope(ctx, j, k_star, u_bar).eval(K);
}

GainResult max_gain_search(const AdviceContext& ctx, int k_star, const VectorXd& u_bar,
                           const GradientEstimate& cost_box, const MatrixXd& M_local_lo,
                           const MatrixXd& M_local_hi, const LineSearchOptions& opts) {
  SearchProblem sp;
  for (int j = 0; j < ctx.spec->n_gp; ++j)
    sp.feasibility.push_back(build_feasibility_envelope(ctx, j, k_star, u_bar));

  const VectorXd step = u_bar - ctx.rec(k_star).u;
  sp.use_sufficient = true;
  for (int i = 0; i < ctx.spec->n_u; ++i)
    sp.sd_const += band_max(Band{cost_box.lower(i), cost_box.upper(i)}, step(i));
  for (int i1 = 0; i1 < ctx.spec->n_u; ++i1)
    for (int i2 = 0; i2 < ctx.spec->n_u; ++i2)
      sp.sd_slope += 0.5 * band_max(Band{M_local_lo(i1, i2), M_local_hi(i1, i2)},
                                    step(i1) * step(i2));
  sp.use_necessary = opts.necessary_decrease_filter;
  if (sp.use_necessary) {
    sp.cost_lower = build_cost_lower_envelope(ctx, k_star, u_bar);
    sp.cost_upper_ref = cost_upper_at_ref(ctx, k_star);
  }

  if (opts.tau_next2) {
    auto K = search_max_gain(ctx, sp, k_star, u_bar, ExcitationMode::Full, opts);
    if (K) return GainResult{*K, LineSearchVariant::Full};
  }
  auto K = search_max_gain(ctx, sp, k_star, u_bar, ExcitationMode::BallOnly, opts);
  if (K) return GainResult{*K, LineSearchVariant::NoFutureDegradation};
  return GainResult{0.0, LineSearchVariant::Zero};
}

GainResult min_cost_gain_search(const AdviceContext& ctx, int k_star,
                                const VectorXd& u_bar, const LineSearchOptions& opts) {
  SearchProblem sp;
  for (int j = 0; j < ctx.spec->n_gp; ++j)
    sp.feasibility.push_back(build_feasibility_envelope(ctx, j, k_star, u_bar));

  const auto& cost = *ctx.spec->numerical_cost;
  const VectorXd u_ref = ctx.rec(k_star).u;
  const VectorXd step = u_bar - u_ref;
  auto objective = [&](double K) { return cost.eval(u_ref + K * step); };

  auto run = [&](ExcitationMode mode) -> std::optional<double> {
    auto feasible = [&](double K) {
      return gain_feasible(ctx, sp, k_star, u_bar, K, mode, opts);
    };
    const int n = opts.grid_points;
    double best_K = -1.0, best_val = kInf;
    for (int i = 0; i < n; ++i) {
      const double K = static_cast<double>(i) / (n - 1);
      if (!feasible(K)) continue;
      const double v = objective(K);
      if (v < best_val) {
        best_val = v;
        best_K = K;
      }
    }
    if (best_K < 0) return std::nullopt;
    // Dense local scan within one grid step of the best point.
    const double h = 1.0 / (n - 1);
    const double lo = std::max(0.0, best_K - h), hi = std::min(1.0, best_K + h);
    const int fine = 2 * opts.refine_steps * 10 + 1;
    for (int i = 0; i < fine; ++i) {
      const double K = lo + (hi - lo) * i / (fine - 1);
      if (!feasible(K)) continue;
      const double v = objective(K);
      if (v < best_val) {
        best_val = v;
        best_K = K;
      }
    }
    return best_K;
  };

  if (opts.tau_next2) {
    auto K = run(ExcitationMode::Full);
    if (K) return GainResult{*K, LineSearchVariant::Full};
  }
  auto K = run(ExcitationMode::BallOnly);
  if (K) return GainResult{*K, LineSearchVariant::NoFutureDegradation};
  return GainResult{0.0, LineSearchVariant::Zero};
}

SlackState update_slacks(const SlackPolicy& policy, const SlackState& state,
                         const VectorXd& g_upper_latest, const VectorXd& g_num_latest) {
  SlackState next = state;
  for (int j = 0; j < state.d_g.size(); ++j)
    if (g_upper_latest(j) > 0) next.d_g(j) = policy.beta_g(j) * state.d_g(j);
  for (int j = 0; j < state.d_num.size(); ++j)
    if (g_num_latest(j) > 0) next.d_num(j) = policy.beta_num(j) * state.d_num(j);
  return next;
}

VectorXd excitation_override(const VectorXd& u_next, const VectorXd& u_ref,
                             double delta_e, SplitRng& rng) {
  if (delta_e <= 0.0) return u_next;
  if ((u_next - u_ref).norm() >= delta_e) return u_next;
  return u_ref + delta_e * rng.unit_vector(static_cast<int>(u_ref.size()));
}

}  // namespace scfo
