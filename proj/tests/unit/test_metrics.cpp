#include "doctest.h"
#include "matchsim/metrics.hpp"
#include "matchsim/policies.hpp"

using namespace matchsim;

namespace {

TraceSummary scripted(std::vector<AgentRecord> agents, double T0, double T) {
  TraceSummary t;
  t.mixing = T0;
  t.horizon = T;
  t.per_agent = std::move(agents);
  for (const auto& r : t.per_agent) {
    for (Counters* c : {&t.full, &t.cohort}) {
      if (c == &t.cohort && r.arrival < T0) continue;
      ++c->arrivals;
      if (r.outcome == Outcome::Matched) ++c->matched;
      if (r.outcome == Outcome::Perished) ++c->perished;
      if (r.outcome == Outcome::Unresolved) ++c->remaining;
    }
  }
  // Pool-size step function rebuilt from the agents' waiting intervals.
  std::vector<std::pair<double, int>> deltas;
  for (const auto& r : t.per_agent) {
    deltas.emplace_back(r.arrival, +1);
    if (r.outcome != Outcome::Unresolved) deltas.emplace_back(r.resolution, -1);
  }
  std::sort(deltas.begin(), deltas.end());
  t.pool_sizes.push_back({0.0, 0});
  long size = 0;
  for (const auto& [time, d] : deltas) {
    size += d;
    if (t.pool_sizes.back().time == time) t.pool_sizes.back().size = static_cast<std::size_t>(size);
    else t.pool_sizes.push_back({time, static_cast<std::size_t>(size)});
  }
  return t;
}

}  // namespace

TEST_CASE("loss") {
  TraceSummary t;
  t.cohort = {10, 6, 3, 1};
  CHECK(compute_loss(t) == doctest::Approx(0.3));
  const Counters& c = t.cohort;
  CHECK(compute_loss(t) == doctest::Approx(double(c.arrivals - c.matched - c.remaining) / c.arrivals));
  TraceSummary empty;
  CHECK(compute_loss(empty) == 0.0);
  CHECK(compute_metrics(empty, 1.0).empty_cohort);
}

TEST_CASE("loss without edges counts every critical agent") {
  MarketConfig cfg;
  cfg.lambda = 30;
  cfg.p = 0.0;
  cfg.horizon = 20;
  cfg.mixing = 10;
  cfg.seed = 4;
  PatientPolicy patient;
  const auto trace = simulate(cfg, patient);
  const Counters& c = trace.cohort;
  CHECK(compute_loss(trace) == doctest::Approx(double(c.arrivals - c.remaining) / c.arrivals));
}

TEST_CASE("mean wait") {
  const auto one = scripted({{0, 1.0, 2.0, 3.0, Outcome::Perished}}, 0.0, 10.0);
  CHECK(compute_mean_wait(one) == doctest::Approx(2.0));

  const auto mixed = scripted({{0, 1.0, 5.0, 2.0, Outcome::Matched, 1},
                               {1, 2.0, 5.0, 2.0, Outcome::Matched, 0},
                               {2, 4.0, 9.0, 10.0, Outcome::Unresolved}},
                              0.0, 10.0);
  CHECK(compute_mean_wait(mixed) == doctest::Approx((1.0 + 0.0 + 6.0) / 3.0));
  CHECK(compute_mean_wait(mixed, WaitScope::MatchedOnly) == doctest::Approx(0.5));

  // Agents arriving before T0 are outside the cohort.
  const auto late = scripted({{0, 1.0, 5.0, 4.0, Outcome::Perished}, {1, 6.0, 1.0, 7.0, Outcome::Perished}}, 5.0, 10.0);
  CHECK(compute_mean_wait(late) == doctest::Approx(1.0));
  CHECK(compute_mean_wait(TraceSummary{}) == 0.0);
}

TEST_CASE("mean wait under patient with unit sojourns") {
  MarketConfig cfg;
  cfg.lambda = 100;
  cfg.p = 0.04;
  cfg.horizon = 30;
  cfg.mixing = 10;
  cfg.seed = 12;
  cfg.departure = {0.0, 0.0};
  PatientPolicy patient;
  const auto trace = simulate(cfg, patient);
  for (const auto& r : trace.per_agent) CHECK(r.resolution - r.arrival <= 1.0 + 1e-12);
  const double w = compute_mean_wait(trace);
  CHECK(w > 0.5);
  CHECK(w <= 1.0);
}

TEST_CASE("dense greedy market matches almost instantly") {
  MarketConfig cfg;
  cfg.lambda = 100;
  cfg.p = 1.0;
  cfg.horizon = 20;
  cfg.mixing = 10;
  cfg.seed = 3;
  GreedyPolicy greedy;
  const auto trace = simulate(cfg, greedy);
  CHECK(compute_loss(trace) < 0.05);
  CHECK(compute_mean_wait(trace) < 0.02);
}

TEST_CASE("congestion") {
  CHECK(compute_congestion(scripted({}, 0.0, 10.0), 0.0, 10.0) == 0.0);
  const auto one = scripted({{0, 1.0, 20.0, 10.0, Outcome::Unresolved}}, 2.0, 10.0);
  CHECK(compute_congestion(one, 2.0, 10.0) == doctest::Approx(1.0));

  // Single closed cohort: the pool integral equals the summed waits.
  const auto closed = scripted({{0, 2.0, 3.0, 4.0, Outcome::Matched, 1},
                                {1, 3.0, 3.0, 4.0, Outcome::Matched, 0},
                                {2, 5.0, 1.5, 6.5, Outcome::Perished}},
                               1.0, 10.0);
  const double waits = 2.0 + 1.0 + 1.5;
  CHECK(compute_congestion(closed, 1.0, 10.0) * 9.0 == doctest::Approx(waits));
}

TEST_CASE("usage") {
  TraceSummary stat;
  stat.static_policy = PolicyKind::Patient;
  auto u = compute_usage(stat);
  CHECK(u.patient == 1.0);
  CHECK(u.switch_count == 0);

  TraceSummary alt;
  alt.mixing = 0.0;
  alt.horizon = 4.0;
  const PolicyKind P = PolicyKind::Patient, G = PolicyKind::Greedy;
  for (std::size_t i = 0; i < 4; ++i) alt.policy_schedule.push_back({i, double(i), i % 2 ? G : P});
  u = compute_usage(alt);
  CHECK(u.patient == 0.5);
  CHECK(u.greedy == 0.5);
  CHECK(u.switch_count == 3);
  CHECK(u.windows == 4);

  // Window longer than the horizon: the single default window governs.
  MarketConfig cfg;
  cfg.lambda = 20;
  cfg.p = 0.1;
  cfg.horizon = 10;
  cfg.mixing = 5;
  ConstantGap gap(-1.0);
  HybridPolicy hybrid(HybridConfig{0.1, 25.0, &gap});
  const auto trace = simulate(cfg, hybrid);
  u = compute_usage(trace);
  CHECK(u.windows == 1);
  CHECK(u.patient == 1.0);
}

TEST_CASE("metric invariants on simulated traces") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    MarketConfig cfg;
    cfg.lambda = 60;
    cfg.p = 0.05;
    cfg.horizon = 20;
    cfg.mixing = 8;
    cfg.seed = seed;
    cfg.departure = {-0.5, 1.0};
    ConstantGap gap(0.2);
    GreedyPolicy greedy;
    PatientPolicy patient;
    HybridPolicy hybrid(HybridConfig{0.1, 0.4, &gap});
    for (MatchingPolicy* policy : {static_cast<MatchingPolicy*>(&greedy), static_cast<MatchingPolicy*>(&patient),
                                   static_cast<MatchingPolicy*>(&hybrid)}) {
      const auto t = simulate(cfg, *policy);
      const auto m = compute_metrics(t, cfg.density());
      CHECK(m.loss >= 0.0);
      CHECK(m.loss <= 1.0);
      CHECK(m.mean_wait >= 0.0);
      CHECK(m.congestion >= 0.0);
      const Counters& c = t.cohort;
      CHECK(m.loss == doctest::Approx(double(c.arrivals - c.matched - c.remaining) / c.arrivals));
      for (const auto& r : t.per_agent) {
        CHECK(r.resolution - r.arrival <= std::min(r.sojourn, t.horizon - r.arrival) + 1e-12);
      }
      if (m.usage.windows > 0) CHECK(m.usage.patient + m.usage.greedy == doctest::Approx(1.0));
      CHECK(m.usage.switch_count <= std::max<std::size_t>(m.usage.windows, 1) - 1);
    }
  }
}
