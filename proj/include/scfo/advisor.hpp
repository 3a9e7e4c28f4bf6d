#ifndef SCFO_ADVISOR_HPP
#define SCFO_ADVISOR_HPP

#include <optional>

#include "scfo/pretreat.hpp"
#include "scfo/projection.hpp"
#include "scfo/reference.hpp"
#include "scfo/stepper.hpp"
#include "scfo/types.hpp"
#include "scfo/validate.hpp"

namespace scfo {

struct AdvisorConfig {
  double delta_e = 0.0;
  ProjectionParams seeds;
  SlackPolicy slacks;
  NoiseModel noise;
  PretreatConfig pretreat;
  LineSearchOptions line_search;
  ReferenceFallback reference_fallback = ReferenceFallback::SafePointU0;
  bool excitation_enabled = false;
  // The pretreatment consistency checks normally run every iteration; harness
  // experiments that study mis-specified constants can switch them off.
  bool run_consistency_checks = true;
  std::uint64_t rng_seed = 0;
};

// One advisor per optimization session. Consistency-check results are cached
// on the history length; everything else is recomputed per call.
class Advisor {
 public:
  Advisor(ProblemSpec spec, LipschitzSet lip, StructureInfo structure,
          AdvisorConfig config, GradientOracle oracle);

  // Validation errors for the wired-up problem; empty means ready.
  std::vector<std::string> validate() const;

  // Runs one full cycle: pretreat, slack update, reference, target,
  // projection, line search, excitation. Fills history value intervals.
  Advice advise(History& history, const SlackState& slack, double tau_next,
                std::optional<double> tau_next2 = std::nullopt,
                const std::optional<VectorXd>& external_target = std::nullopt);

  // Box-clipped steepest-descent default target from the reference.
  VectorXd default_target(const VectorXd& u_ref, const VectorXd& gradient) const;

  const ProblemSpec& spec() const { return spec_; }
  const LipschitzSet& adjusted_constants() const { return adjusted_; }

 private:
  ProblemSpec spec_;
  LipschitzSet lip_;
  StructureInfo structure_;
  AdvisorConfig config_;
  GradientOracle oracle_;

  LipschitzSet adjusted_;
  int consistency_length_ = -1;
  std::vector<RecordGradients> record_gradients_;

  void refresh_gradients(const History& history);
  void run_consistency(const History& history);
};

// Convenience single-shot form of the advise operation.
Advice advise(History& history, const ProblemSpec& spec, const LipschitzSet& lip,
              const StructureInfo& structure, const AdvisorConfig& config,
              const GradientOracle& oracle, const SlackState& slack, double tau_next,
              std::optional<double> tau_next2 = std::nullopt,
              const std::optional<VectorXd>& external_target = std::nullopt);

}  // namespace scfo

#endif  // SCFO_ADVISOR_HPP
