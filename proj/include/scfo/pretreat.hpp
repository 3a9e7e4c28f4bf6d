#ifndef SCFO_PRETREAT_HPP
#define SCFO_PRETREAT_HPP

#include <optional>
#include <vector>

#include "scfo/types.hpp"

namespace scfo {

// Gradient estimates at one record's (u, tau), cost first when experimental.
struct RecordGradients {
  std::optional<GradientEstimate> cost;
  std::vector<std::optional<GradientEstimate>> g;
};

struct PretreatConfig {
  double delta_r_min = 1e-6;
  // Sample-group enumeration: singletons and the full repeat group by
  // default; all subsets when enabled and the repeat count is within cap.
  bool full_subset_enumeration = false;
  int full_subset_cap = 12;
  // Safety valve on the consistency-check growth loop; with distinct time
  // stamps the loop terminates long before this.
  int growth_cap = 200;
  int sweep_cap = 100000;
};

struct ConsistencyOutcome {
  int rounds = 0;      // number of growth rounds applied
  bool modified = false;
  bool capped = false;
};

// Noise-band-only intervals for one function, independent of any Lipschitz
// constants; records without a value get an unbounded interval.
std::vector<ValueInterval> conservative_intervals(const History& history, FnId fn,
                                                  const ProblemSpec& spec,
                                                  const NoiseModel& noise);

// First-order Lipschitz consistency check for one function: grows the
// constants through the three-phase schedule until every ordered record pair
// satisfies the interval-based pairwise bounds.
ConsistencyOutcome consistency_check_first_order(
    const History& history, const std::vector<ValueInterval>& conservative,
    FnConstants* constants, const PretreatConfig& cfg = {});

// Second-order check for the cost: same schedule applied to the M matrices,
// using the first-order time constants fixed beforehand and per-record
// gradient boxes. Pairs lacking an estimate are skipped.
ConsistencyOutcome consistency_check_second_order(
    const History& history, const std::vector<ValueInterval>& conservative,
    const std::vector<RecordGradients>& gradients, const Band& kappa_tau,
    MatrixXd* M_lower, MatrixXd* M_upper, const PretreatConfig& cfg = {});

struct IntervalDiagnostics {
  int sweeps = 0;
  double last_delta = 0.0;
};

// Lower/upper value intervals for one function at every record: best
// repeated-measurement bounds, then iterated Lipschitz refinement until the
// best per-sweep improvement drops to delta_r_min. Intervals only narrow.
IntervalDiagnostics compute_intervals(const History& history, FnId fn,
                                      const ProblemSpec& spec, const LipschitzSet& lip,
                                      const StructureInfo& structure,
                                      const NoiseModel& noise,
                                      const std::vector<RecordGradients>& gradients,
                                      std::vector<ValueInterval>* intervals,
                                      const PretreatConfig& cfg = {});

// Worst-case products used throughout the bound arithmetic.
inline double band_max(const Band& b, double d) { return std::max(b.lo * d, b.hi * d); }
inline double band_min(const Band& b, double d) { return std::min(b.lo * d, b.hi * d); }

// Region spanned by two records (smallest box times time interval).
Region two_record_region(const Measurement& a, const Measurement& b);

}  // namespace scfo

#endif  // SCFO_PRETREAT_HPP
