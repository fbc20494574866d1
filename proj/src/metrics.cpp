#include "matchsim/metrics.hpp"

#include <algorithm>

namespace matchsim {

double compute_loss(const TraceSummary& trace) {
  const Counters& c = trace.cohort;
  if (c.arrivals == 0) return 0.0;
  return static_cast<double>(c.perished) / static_cast<double>(c.arrivals);
}

double compute_mean_wait(const TraceSummary& trace, WaitScope scope) {
  double total = 0.0;
  std::size_t n = 0;
  for (const AgentRecord& r : trace.per_agent) {
    if (r.arrival < trace.mixing) continue;
    if (scope == WaitScope::MatchedOnly && r.outcome != Outcome::Matched) continue;
    total += r.resolution - r.arrival;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double integrate_pool_size(const TraceSummary& trace, double from, double to) {
  const auto& steps = trace.pool_sizes;
  double area = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double seg_begin = std::max(steps[i].time, from);
    const double seg_end = std::min(i + 1 < steps.size() ? steps[i + 1].time : trace.horizon, to);
    if (seg_end > seg_begin) area += static_cast<double>(steps[i].size) * (seg_end - seg_begin);
  }
  return area;
}

double compute_congestion(const TraceSummary& trace, double from, double to) {
  if (!(to > from)) return 0.0;
  return integrate_pool_size(trace, from, to) / (to - from);
}

std::vector<std::size_t> select_windows(const TraceSummary& trace, double from, double to) {
  std::vector<std::size_t> out;
  const auto& sched = trace.policy_schedule;
  for (std::size_t i = 0; i < sched.size(); ++i) {
    if (sched[i].start >= from && sched[i].start < to) out.push_back(i);
  }
  if (out.empty()) {
    // No boundary inside the interval: the window covering `from` governs it.
    for (std::size_t i = sched.size(); i-- > 0;) {
      if (sched[i].start <= from) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

PolicyUsage compute_usage(const TraceSummary& trace, double from, double to) {
  PolicyUsage u;
  if (trace.policy_schedule.empty()) {
    if (trace.static_policy) {
      u.windows = 1;
      (*trace.static_policy == PolicyKind::Patient ? u.patient : u.greedy) = 1.0;
    }
    return u;
  }
  const auto selected = select_windows(trace, from, to);
  std::size_t patient = 0;
  for (std::size_t j = 0; j < selected.size(); ++j) {
    const PolicyKind kind = trace.policy_schedule[selected[j]].kind;
    if (kind == PolicyKind::Patient) ++patient;
    if (j > 0 && trace.policy_schedule[selected[j - 1]].kind != kind) ++u.switch_count;
  }
  u.windows = selected.size();
  if (u.windows > 0) {
    u.patient = static_cast<double>(patient) / static_cast<double>(u.windows);
    u.greedy = 1.0 - u.patient;
  }
  return u;
}

MetricsReport compute_metrics(const TraceSummary& trace, double density) {
  MetricsReport m;
  m.loss = compute_loss(trace);
  m.mean_wait = compute_mean_wait(trace);
  m.congestion = compute_congestion(trace, trace.mixing, trace.horizon);
  m.usage = compute_usage(trace);
  m.density = density;
  m.window_begin = trace.mixing;
  m.window_end = trace.horizon;
  m.empty_cohort = trace.cohort.arrivals == 0;
  return m;
}

}  // namespace matchsim
