#ifndef SCFO_VALIDATE_HPP
#define SCFO_VALIDATE_HPP

#include <string>
#include <vector>

#include "scfo/types.hpp"

namespace scfo {

// Collects every invariant violation found in the problem definition.
// An empty result means the inputs are safe to advise on; nothing in the
// advice path throws once this passes.
std::vector<std::string> validate_problem(const ProblemSpec& spec,
                                          const LipschitzSet& lip,
                                          const StructureInfo& structure);

// Slack policy checks (Theorem-3 beta bound, sign constraints).
std::vector<std::string> validate_slack_policy(const SlackPolicy& policy,
                                               const ProblemSpec& spec);

// Noise model checks.
std::vector<std::string> validate_noise(const NoiseModel& noise,
                                        const ProblemSpec& spec);

}  // namespace scfo

#endif  // SCFO_VALIDATE_HPP
