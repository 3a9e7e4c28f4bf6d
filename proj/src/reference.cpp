#include "scfo/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scfo/geometry.hpp"

namespace scfo {

namespace {

constexpr double kTieTol = 1e-12;

}  // namespace

double backed_off_experimental(const AdviceContext& ctx, int j, int k_bar) {
  const Measurement& m = ctx.rec(k_bar);
  const double g_hi = ctx.history->g_intervals[k_bar][j].hi;
  if (!(g_hi < kInf)) return kInf;
  const double dt = ctx.tau_next - m.time;
  const Region region =
      ball_region(*ctx.spec, m.u, ctx.delta_e, m.time, ctx.tau_next);
  const FnConstants local = local_constants(*ctx.lip, FnId::g(j), region);
  const IndexSetFlag conc = ctx.structure->local(FnId::g(j), false, region);
  const GradientEstimate* ge = ctx.grad(k_bar, FnId::g(j));
  const double deg = (conc.eta && ge) ? ge->dtau.hi * dt : local.dtau.hi * dt;
  const VectorXd km = kappa_m(j, *ctx.spec, *ctx.lip, *ctx.structure, m.u, m.time,
                              ctx.tau_next, ctx.delta_e, ge);
  return g_hi + deg + ctx.delta_e * km.norm();
}

double backed_off_numerical(const AdviceContext& ctx, int j, int k_bar) {
  const Measurement& m = ctx.rec(k_bar);
  return ctx.spec->numerical_constraints[j].ball_max(m.u, ctx.delta_e);
}

bool in_compressed_box(const AdviceContext& ctx, int k_bar) {
  const VectorXd& u = ctx.rec(k_bar).u;
  for (int i = 0; i < ctx.spec->n_u; ++i) {
    if (u(i) < ctx.spec->u_lower(i) + ctx.delta_e - kTieTol) return false;
    if (u(i) > ctx.spec->u_upper(i) - ctx.delta_e + kTieTol) return false;
  }
  return true;
}

double cost_lower_at_now(const AdviceContext& ctx, int k_bar) {
  const double lo = ctx.history->cost_intervals[k_bar].lo;
  if (!(lo > -kInf)) return -kInf;
  const Measurement& m = ctx.rec(k_bar);
  const Measurement& now = ctx.rec(ctx.count() - 1);
  const double dt = now.time - m.time;
  const Region region = two_record_region(m, now);
  const FnConstants local = local_constants(*ctx.lip, FnId::cost(), region);
  const IndexSetFlag conv = ctx.structure->local(FnId::cost(), true, region);
  const GradientEstimate* ge = ctx.grad(k_bar, FnId::cost());
  const double deg = (conv.eta && ge) ? ge->dtau.lo * dt : local.dtau.lo * dt;
  return lo + deg;
}

double cost_upper_at_now(const AdviceContext& ctx, int k_bar) {
  const double hi = ctx.history->cost_intervals[k_bar].hi;
  if (!(hi < kInf)) return kInf;
  const Measurement& m = ctx.rec(k_bar);
  const Measurement& now = ctx.rec(ctx.count() - 1);
  const double dt = now.time - m.time;
  const Region region = two_record_region(m, now);
  const FnConstants local = local_constants(*ctx.lip, FnId::cost(), region);
  const IndexSetFlag conc = ctx.structure->local(FnId::cost(), false, region);
  const GradientEstimate* ge = ctx.grad(k_bar, FnId::cost());
  const double deg = (conc.eta && ge) ? ge->dtau.hi * dt : local.dtau.hi * dt;
  return hi + deg;
}

namespace {

bool backed_off_feasible(const AdviceContext& ctx, int k_bar) {
  for (int j = 0; j < ctx.spec->n_gp; ++j)
    if (backed_off_experimental(ctx, j, k_bar) > ctx.slack_next.d_g(j) + kTieTol)
      return false;
  for (int j = 0; j < ctx.spec->n_g(); ++j)
    if (backed_off_numerical(ctx, j, k_bar) > ctx.slack_next.d_num(j) + kTieTol)
      return false;
  return in_compressed_box(ctx, k_bar);
}

}  // namespace

std::pair<int, double> minimax_reference(const AdviceContext& ctx) {
  int best = 0;
  double best_val = kInf;
  for (int k = 0; k < ctx.count(); ++k) {
    double worst = -kInf;
    for (int j = 0; j < ctx.spec->n_gp; ++j)
      worst = std::max(worst,
                       backed_off_experimental(ctx, j, k) - ctx.slack_next.d_g(j));
    for (int j = 0; j < ctx.spec->n_g(); ++j)
      worst = std::max(worst, backed_off_numerical(ctx, j, k) - ctx.slack_next.d_num(j));
    const VectorXd& u = ctx.rec(k).u;
    for (int i = 0; i < ctx.spec->n_u; ++i) {
      worst = std::max(worst, ctx.spec->u_lower(i) + ctx.delta_e - u(i));
      worst = std::max(worst, u(i) + ctx.delta_e - ctx.spec->u_upper(i));
    }
    if (worst <= best_val + kTieTol) {  // ties break toward recency
      if (worst < best_val - kTieTol || k > best) {
        best = k;
        best_val = std::min(best_val, worst);
      }
    }
  }
  return {best, best_val};
}

ReferenceChoice select_reference(const AdviceContext& ctx, ReferenceFallback fallback) {
  if (ctx.count() == 0) throw std::invalid_argument("select_reference: empty history");
  ReferenceChoice out;

  std::vector<int> feasible;
  for (int k = 0; k < ctx.count(); ++k)
    if (backed_off_feasible(ctx, k)) feasible.push_back(k);

  if (!feasible.empty()) {
    out.primary_feasible = true;
    if (ctx.spec->cost_kind == CostKind::Numerical) {
      const auto& cost = *ctx.spec->numerical_cost;
      int best = feasible.front();
      double best_val = cost.eval(ctx.rec(best).u);
      for (int k : feasible) {
        const double v = cost.eval(ctx.rec(k).u);
        if (v < best_val - kTieTol || (v <= best_val + kTieTol && k > best)) {
          best = k;
          best_val = std::min(best_val, v);
        }
      }
      out.k_star = best;
      out.rule = ReferenceRule::NumericalPrimary;
      return out;
    }
    double min_upper = kInf;
    for (int k : feasible) min_upper = std::min(min_upper, cost_upper_at_now(ctx, k));
    for (auto it = feasible.rbegin(); it != feasible.rend(); ++it) {
      if (cost_lower_at_now(ctx, *it) <= min_upper + kTieTol) {
        out.k_star = *it;
        out.rule = ReferenceRule::Primary;
        return out;
      }
    }
    // Unreachable with consistent bounds: the argmin of the upper bound
    // always passes its own test. Kept as a safety net.
  }

  auto [idx, val] = minimax_reference(ctx);
  out.minimax_index = idx;
  out.minimax_value = val;
  if (fallback == ReferenceFallback::Minimax) {
    out.k_star = idx;
    out.rule = ReferenceRule::Minimax;
  } else {
    out.k_star = 0;
    out.rule = ReferenceRule::SafePointU0;
  }
  return out;
}

}  // namespace scfo
