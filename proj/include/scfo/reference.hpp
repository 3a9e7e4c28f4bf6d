#ifndef SCFO_REFERENCE_HPP
#define SCFO_REFERENCE_HPP

#include <vector>

#include "scfo/pretreat.hpp"
#include "scfo/types.hpp"

namespace scfo {

// Shared inputs of the reference search and the projection triggers.
struct AdviceContext {
  const History* history = nullptr;
  const ProblemSpec* spec = nullptr;
  const LipschitzSet* lip = nullptr;  // consistency-adjusted constants
  const StructureInfo* structure = nullptr;
  const std::vector<RecordGradients>* gradients = nullptr;  // per record
  SlackState slack_next;  // d^{k+1}
  double delta_e = 0.0;
  double tau_next = 0.0;  // time of the upcoming experiment

  const Measurement& rec(int k) const { return history->record(k); }
  int count() const { return history->size(); }
  const GradientEstimate* grad(int k, FnId fn) const {
    const RecordGradients& rg = (*gradients)[k];
    if (fn.is_cost) return rg.cost ? &*rg.cost : nullptr;
    return rg.g[fn.constraint] ? &*rg.g[fn.constraint] : nullptr;
  }
};

// Left side of the backed-off robust experimental condition for record k_bar:
// upper value bound, degradation extrapolation to tau_next, and the
// excitation-ball term delta_e |kappa_m|.
double backed_off_experimental(const AdviceContext& ctx, int j, int k_bar);

// Ball maximum of numerical constraint j around record k_bar.
double backed_off_numerical(const AdviceContext& ctx, int j, int k_bar);

// Compressed-box membership of record k_bar.
bool in_compressed_box(const AdviceContext& ctx, int k_bar);

// Robust cost bounds extrapolated to the current time tau_k (the latest
// record's time) for the reference comparison.
double cost_lower_at_now(const AdviceContext& ctx, int k_bar);
double cost_upper_at_now(const AdviceContext& ctx, int k_bar);

struct ReferenceChoice {
  int k_star = 0;
  ReferenceRule rule = ReferenceRule::Primary;
  bool primary_feasible = false;
  int minimax_index = 0;        // argmin of the worst backed-off violation
  double minimax_value = 0.0;   // its worst-case value
};

enum class ReferenceFallback { SafePointU0, Minimax };

// Reference selection: the most recent robustly-feasible, cost-dominant
// record; numerical costs instead take the feasible record of least cost.
// When nothing qualifies the fallback policy decides between the safe point
// u_0 and the minimax record.
ReferenceChoice select_reference(const AdviceContext& ctx, ReferenceFallback fallback);

// Record minimizing the worst backed-off violation; ties break to recency.
std::pair<int, double> minimax_reference(const AdviceContext& ctx);

}  // namespace scfo

#endif  // SCFO_REFERENCE_HPP
