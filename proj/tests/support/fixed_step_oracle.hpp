#pragma once

#include <vector>

#include "matchsim/market.hpp"

namespace matchsim::testing {

struct OracleOutcome {
  Outcome outcome = Outcome::Unresolved;
  AgentId partner = kNoAgent;
  double resolution = 0.0;

  bool operator==(const OracleOutcome&) const = default;
};

/// Naive re-simulation of a static policy: a clock advancing in steps of
/// `dt`; within each step the due arrivals and criticalities are handled in
/// time order. Shares only the sampled arrivals and the compatibility
/// function with the event-driven engine.
std::vector<OracleOutcome> fixed_step_run(const MarketConfig& cfg, PolicyKind kind, double dt = 1e-3);

}  // namespace matchsim::testing
