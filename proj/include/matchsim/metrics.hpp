#pragma once

#include <cstddef>
#include <vector>

#include "matchsim/market.hpp"

namespace matchsim {

struct PolicyUsage {
  double patient = 0.0;
  double greedy = 0.0;
  std::size_t switch_count = 0;
  std::size_t windows = 0;
};

struct MetricsReport {
  double loss = 0.0;
  double mean_wait = 0.0;
  double congestion = 0.0;
  PolicyUsage usage;
  double density = 0.0;
  double window_begin = 0.0;  // T0
  double window_end = 0.0;    // T
  bool empty_cohort = false;  // loss and wait were defined as 0
};

/// D / A over the measurement cohort (agents arriving in [T0, T]); 0 when A = 0.
double compute_loss(const TraceSummary& trace);

enum class WaitScope {
  AllAgents,    // perished and unresolved agents included, censored at T
  MatchedOnly,
};

/// Mean time-in-pool over the cohort; agents unresolved at T contribute T - arrival.
double compute_mean_wait(const TraceSummary& trace, WaitScope scope = WaitScope::AllAgents);

/// Time-averaged pool size over [from, to], integrated exactly from the step function.
double compute_congestion(const TraceSummary& trace, double from, double to);

/// Exact integral of |Z_t| over [from, to].
double integrate_pool_size(const TraceSummary& trace, double from, double to);

/// Schedule indices of the windows starting in [from, to); when none does,
/// the single window covering `from`.
std::vector<std::size_t> select_windows(const TraceSummary& trace, double from, double to);

/// Policy shares over select_windows(trace, from, to). Static runs report
/// their single kind with share 1.
PolicyUsage compute_usage(const TraceSummary& trace, double from, double to);
inline PolicyUsage compute_usage(const TraceSummary& trace) {
  return compute_usage(trace, trace.mixing, trace.horizon);
}

MetricsReport compute_metrics(const TraceSummary& trace, double density);

}  // namespace matchsim
