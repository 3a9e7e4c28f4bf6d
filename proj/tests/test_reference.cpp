#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "scfo/reference.hpp"
#include "scfo/rng.hpp"

using namespace scfo;
using namespace scfo::testfix;

namespace {

// Direct restatement of the backed-off feasibility test for one record.
bool oracle_feasible(const AdviceContext& ctx, int k) {
  for (int j = 0; j < ctx.spec->n_gp; ++j)
    if (backed_off_experimental(ctx, j, k) > ctx.slack_next.d_g(j) + 1e-12) return false;
  for (int j = 0; j < ctx.spec->n_g(); ++j)
    if (backed_off_numerical(ctx, j, k) > ctx.slack_next.d_num(j) + 1e-12) return false;
  return in_compressed_box(ctx, k);
}

}  // namespace

TEST_CASE("single safe record is the reference") {
  ContextFixture f = plant_fixture("static");
  f.add_exact_record(vec2(0.2, 0.05), 0.0);
  auto choice = select_reference(f.ctx(0.02, 1.0), ReferenceFallback::SafePointU0);
  CHECK(choice.k_star == 0);
  CHECK(choice.rule == ReferenceRule::Primary);
  CHECK(choice.primary_feasible);
}

TEST_CASE("recency wins among cost-compatible records; dominance filters") {
  ContextFixture f = plant_fixture("static");
  // Two interior feasible points; the second has the lower cost.
  f.add_exact_record(vec2(0.0, 0.2), 0.0);
  f.add_exact_record(vec2(0.3, 0.35), 1.0);
  REQUIRE(f.plant.cost(vec2(0.3, 0.35), 0) < f.plant.cost(vec2(0.0, 0.2), 0));
  auto choice = select_reference(f.ctx(0.0, 2.0), ReferenceFallback::SafePointU0);
  CHECK(choice.k_star == 1);

  // Reversed order: the newer record is provably worse, so it is skipped.
  ContextFixture g = plant_fixture("static");
  g.add_exact_record(vec2(0.3, 0.35), 0.0);
  g.add_exact_record(vec2(0.0, 0.2), 1.0);
  auto choice2 = select_reference(g.ctx(0.0, 2.0), ReferenceFallback::SafePointU0);
  CHECK(choice2.k_star == 0);
}

TEST_CASE("numerical cost takes the feasible minimum") {
  ContextFixture f = plant_fixture("static");
  f.spec = plant_problem(f.plant, /*cost_numerical=*/true);
  f.add_exact_record(vec2(0.0, 0.2), 0.0);
  f.add_exact_record(vec2(0.3, 0.35), 1.0);
  f.add_exact_record(vec2(-0.1, 0.3), 2.0);
  // Cost centers (0.5, 0.4): record 1 is closest.
  auto choice = select_reference(f.ctx(0.0, 3.0), ReferenceFallback::SafePointU0);
  CHECK(choice.rule == ReferenceRule::NumericalPrimary);
  CHECK(choice.k_star == 1);
}

TEST_CASE("fallback policies when nothing is feasible") {
  ContextFixture f = plant_fixture("degrading_plus");
  // Doctor clearly infeasible measured values.
  f.add_exact_record(vec2(-0.35, 0.1), 0.0);
  f.add_exact_record(vec2(-0.3, 0.12), 1.0);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      f.history.g_intervals[k][j] = ValueInterval{0.4 + 0.1 * k, 0.5 + 0.1 * k};

  auto safe = select_reference(f.ctx(0.02, 2.0), ReferenceFallback::SafePointU0);
  CHECK(safe.rule == ReferenceRule::SafePointU0);
  CHECK(safe.k_star == 0);
  CHECK(!safe.primary_feasible);

  auto mm = select_reference(f.ctx(0.02, 2.0), ReferenceFallback::Minimax);
  CHECK(mm.rule == ReferenceRule::Minimax);
  CHECK(mm.k_star == 0);  // lower doctored violation at record 0
}

TEST_CASE("minimax equals exhaustive enumeration on fuzzed histories") {
  SplitRng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    ContextFixture f = plant_fixture("degrading_minus");
    const int n_rec = 2 + static_cast<int>(rng.uniform() * 20);
    for (int k = 0; k < n_rec; ++k) {
      VectorXd u = vec2(-0.5 + rng.uniform(), 0.8 * rng.uniform());
      f.add_exact_record(u, k);
      // Randomly widen some intervals to fuzz the upper bounds.
      for (int j = 0; j < 2; ++j) {
        const double widen = 0.3 * rng.uniform();
        f.history.g_intervals[k][j].hi += widen;
      }
    }
    AdviceContext ctx = f.ctx(0.03, n_rec);
    auto [idx, val] = minimax_reference(ctx);

    int best = 0;
    double best_val = kInf;
    for (int k = 0; k < n_rec; ++k) {
      double worst = -kInf;
      for (int j = 0; j < 2; ++j)
        worst = std::max(worst, backed_off_experimental(ctx, j, k) - 0.0);
      worst = std::max(worst, backed_off_numerical(ctx, 0, k) - 0.0);
      for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, ctx.spec->u_lower(i) + 0.03 - ctx.rec(k).u(i));
        worst = std::max(worst, ctx.rec(k).u(i) + 0.03 - ctx.spec->u_upper(i));
      }
      if (worst < best_val - 1e-12 || (worst <= best_val + 1e-12 && k > best)) {
        best_val = std::min(best_val, worst);
        best = k;
      }
    }
    CHECK(idx == best);
    CHECK(val == doctest::Approx(best_val));
  }
}

TEST_CASE("primary output is maximal among feasible cost-compatible records") {
  SplitRng rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    ContextFixture f = plant_fixture("degrading_minus");
    const int n_rec = 2 + static_cast<int>(rng.uniform() * 48);
    for (int k = 0; k < n_rec; ++k) {
      VectorXd u = vec2(-0.48 + 0.96 * rng.uniform(), 0.02 + 0.76 * rng.uniform());
      f.add_exact_record(u, k);
    }
    f.slack.d_g = vec2(0.2, 0.2);
    AdviceContext ctx = f.ctx(0.02, n_rec);
    auto choice = select_reference(ctx, ReferenceFallback::SafePointU0);
    if (!choice.primary_feasible) continue;

    // Oracle: re-evaluate membership and the cost filter directly.
    CHECK(oracle_feasible(ctx, choice.k_star));
    double min_upper = kInf;
    for (int k = 0; k < n_rec; ++k)
      if (oracle_feasible(ctx, k)) min_upper = std::min(min_upper, cost_upper_at_now(ctx, k));
    CHECK(cost_lower_at_now(ctx, choice.k_star) <= min_upper + 1e-9);
    for (int k = choice.k_star + 1; k < n_rec; ++k) {
      if (!oracle_feasible(ctx, k)) continue;
      // Any more recent feasible record must have failed the cost filter.
      CHECK(cost_lower_at_now(ctx, k) > min_upper - 1e-12);
    }
  }
}
