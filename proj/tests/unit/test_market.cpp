#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixed_step_oracle.hpp"
#include "matchsim/metrics.hpp"
#include "matchsim/policies.hpp"

using namespace matchsim;

namespace {

MarketConfig small_market(std::uint64_t seed, double lambda = 20.0, double p = 0.1, double horizon = 20.0) {
  MarketConfig cfg;
  cfg.lambda = lambda;
  cfg.p = p;
  cfg.horizon = horizon;
  cfg.mixing = horizon / 2;
  cfg.seed = seed;
  cfg.departure = {0.0, 0.8};
  return cfg;
}

}  // namespace

TEST_CASE("market config validation") {
  MarketConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mixing = cfg.horizon;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.departure.sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda = 100;
  cfg.p = 0.08;
  CHECK(cfg.density() == doctest::Approx(8.0));
}

TEST_CASE("compatibility") {
  SUBCASE("degenerate probabilities") {
    for (AgentId i = 0; i < 50; ++i) {
      for (AgentId j = i + 1; j < 50; ++j) {
        CHECK_FALSE(are_compatible(i, j, 0.0, 99));
        CHECK(are_compatible(i, j, 1.0, 99));
      }
    }
  }
  SUBCASE("self pair is rejected") { CHECK_THROWS_AS(are_compatible(3, 3, 0.5, 1), std::invalid_argument); }
  SUBCASE("symmetric and order independent") {
    const CompatibilityGraph g(0.3, 1234);
    for (AgentId i = 0; i < 200; ++i) {
      for (AgentId j = 0; j < 200; j += 7) {
        if (i != j) CHECK(g(i, j) == g(j, i));
      }
    }
    // Querying in a different order yields the same answers.
    std::vector<bool> forward, backward;
    for (AgentId j = 1; j < 300; ++j) forward.push_back(g(0, j));
    for (AgentId j = 299; j >= 1; --j) backward.push_back(g(j, 0));
    std::reverse(backward.begin(), backward.end());
    CHECK(forward == backward);
  }
  SUBCASE("empirical rate over 1e5 distinct pairs") {
    const CompatibilityGraph g(0.05, derive_seed(7, "compatibility"));
    std::size_t hits = 0, total = 0;
    for (AgentId i = 0; total < 100000; ++i) {
      for (AgentId j = i + 1; j < i + 1001 && total < 100000; ++j, ++total) hits += g(i, j) ? 1 : 0;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(total);
    CHECK(rate >= 0.0466);
    CHECK(rate <= 0.0534);
  }
}

TEST_CASE("arrival sampling") {
  SUBCASE("zero rate gives an empty run") {
    MarketConfig cfg = small_market(1);
    cfg.lambda = 0.0;
    RngStreams s(cfg.seed);
    CHECK(sample_arrivals(cfg, s).empty());
    PatientPolicy patient;
    const auto trace = simulate(cfg, patient);
    CHECK(trace.full.arrivals == 0);
    CHECK(trace.cohort.arrivals == 0);
  }
  SUBCASE("sigma 0, mu 0 gives unit sojourns") {
    MarketConfig cfg = small_market(2);
    cfg.departure = {0.0, 0.0};
    RngStreams s(cfg.seed);
    const auto draws = sample_arrivals(cfg, s);
    REQUIRE_FALSE(draws.empty());
    for (const auto& d : draws) CHECK(d.sojourn == 1.0);
  }
  SUBCASE("Poisson count concentration") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      MarketConfig cfg;
      cfg.lambda = 100;
      cfg.horizon = 100;
      cfg.mixing = 50;
      cfg.seed = seed;
      RngStreams s(seed);
      const auto n = static_cast<double>(sample_arrivals(cfg, s).size());
      CHECK(std::abs(n - 10000.0) <= 300.0);
    }
  }
  SUBCASE("arrival times increase and stay within the horizon") {
    MarketConfig cfg = small_market(3);
    RngStreams s(cfg.seed);
    const auto draws = sample_arrivals(cfg, s);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      CHECK(draws[i].time > 0.0);
      CHECK(draws[i].time <= cfg.horizon);
      CHECK(draws[i].sojourn > 0.0);
      if (i) CHECK(draws[i].time > draws[i - 1].time);
    }
  }
}

TEST_CASE("event calendar ordering") {
  // Agent 0 arrives at 1 and becomes critical at 2; agent 1 arrives at 2.
  const std::vector<ArrivalDraw> arrivals{{1.0, 1.0}, {2.0, 0.5}};
  const std::vector<double> boundaries{0.0, 2.0};
  EventCalendar cal(arrivals, boundaries);
  std::vector<std::pair<double, EventKind>> seen;
  while (auto e = cal.next()) seen.emplace_back(e->time, e->kind);
  const std::vector<std::pair<double, EventKind>> expected{
      {0.0, EventKind::WindowBoundary}, {1.0, EventKind::Arrival},  {2.0, EventKind::WindowBoundary},
      {2.0, EventKind::Arrival},        {2.0, EventKind::Critical}, {2.5, EventKind::Critical}};
  CHECK(seen == expected);
}

TEST_CASE("window starts") {
  CHECK(window_starts(100.0, 0.3).size() == 334);
  CHECK(window_starts(100.0, 0.1).size() == 1000);
  CHECK(window_starts(100.0, 5.0).size() == 20);
  CHECK(window_starts(10.0, 25.0).size() == 1);
  const auto starts = window_starts(5.0, 0.3);
  CHECK(starts.size() == 17);
  CHECK(starts[3] == 3 * 0.3);
  CHECK_THROWS_AS(window_starts(5.0, 0.0), ConfigError);
}

TEST_CASE("forced match with two arrivals") {
  MarketConfig cfg = small_market(5, 1.0, 1.0, 10.0);
  cfg.mixing = 0.0;
  const std::vector<ArrivalDraw> arrivals{{1.0, 5.0}, {2.0, 5.0}};
  GreedyPolicy greedy;
  const auto trace = simulate(cfg, greedy, arrivals);
  CHECK(trace.full.matched == 2);
  CHECK(trace.full.perished == 0);
  CHECK(trace.per_agent[1].partner == 0);
  CHECK(trace.per_agent[0].resolution == 2.0);
}

TEST_CASE("no edges: every critical agent perishes") {
  for (auto kind : {PolicyKind::Greedy, PolicyKind::Patient}) {
    MarketConfig cfg = small_market(11, 20.0, 0.0);
    GreedyPolicy greedy;
    PatientPolicy patient;
    MatchingPolicy& policy = kind == PolicyKind::Greedy ? static_cast<MatchingPolicy&>(greedy) : patient;
    const auto trace = simulate(cfg, policy);
    CHECK(trace.full.matched == 0);
    for (const auto& r : trace.per_agent) {
      if (r.arrival + r.sojourn <= cfg.horizon) {
        CHECK(r.outcome == Outcome::Perished);
        CHECK(r.resolution == r.arrival + r.sojourn);
      } else {
        CHECK(r.outcome == Outcome::Unresolved);
      }
    }
  }
}

TEST_CASE("conservation, parity, determinism, pool integral") {
  ConstantGap gap(0.0);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    MarketConfig cfg = small_market(seed, 40.0, 0.1, 20.0);
    for (int which = 0; which < 3; ++which) {
      GreedyPolicy greedy;
      PatientPolicy patient;
      HybridPolicy hybrid(HybridConfig{0.1, 0.5, &gap});
      MatchingPolicy* policy = which == 0 ? static_cast<MatchingPolicy*>(&greedy)
                               : which == 1 ? static_cast<MatchingPolicy*>(&patient)
                                            : &hybrid;
      const auto trace = simulate(cfg, *policy);
      const Counters& c = trace.full;
      CHECK(c.arrivals == c.matched + c.perished + c.remaining);
      CHECK(c.matched % 2 == 0);
      const Counters& h = trace.cohort;
      CHECK(h.arrivals == h.matched + h.perished + h.remaining);

      double waits = 0.0;
      for (const auto& r : trace.per_agent) waits += r.resolution - r.arrival;
      const double area = integrate_pool_size(trace, 0.0, cfg.horizon);
      CHECK(area == doctest::Approx(waits).epsilon(1e-12));

      // Same config and policy parameters reproduce the trace exactly.
      GreedyPolicy greedy2;
      PatientPolicy patient2;
      HybridPolicy hybrid2(HybridConfig{0.1, 0.5, &gap});
      MatchingPolicy* again = which == 0 ? static_cast<MatchingPolicy*>(&greedy2)
                              : which == 1 ? static_cast<MatchingPolicy*>(&patient2)
                                           : &hybrid2;
      CHECK(simulate(cfg, *again) == trace);
    }
  }
}

TEST_CASE("agent lifecycle invariants") {
  MarketConfig cfg = small_market(21, 50.0, 0.05, 20.0);
  PatientPolicy patient;
  const auto trace = simulate(cfg, patient);
  for (const auto& r : trace.per_agent) {
    if (r.outcome == Outcome::Matched) {
      CHECK(r.resolution >= r.arrival);
      CHECK(r.resolution <= r.arrival + r.sojourn);
      CHECK(trace.per_agent[r.partner].partner == r.id);
      CHECK(trace.per_agent[r.partner].resolution == r.resolution);
    } else if (r.outcome == Outcome::Perished) {
      CHECK(r.resolution == r.arrival + r.sojourn);
    }
  }
  for (std::size_t i = 1; i < trace.pool_sizes.size(); ++i) {
    CHECK(trace.pool_sizes[i].time > trace.pool_sizes[i - 1].time);
    CHECK(trace.pool_sizes[i].size != trace.pool_sizes[i - 1].size);
  }
}

TEST_CASE("event-driven engine agrees with the fixed-step oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (auto kind : {PolicyKind::Greedy, PolicyKind::Patient}) {
      MarketConfig cfg = small_market(seed, 20.0, 0.1, 20.0);
      GreedyPolicy greedy;
      PatientPolicy patient;
      MatchingPolicy& policy = kind == PolicyKind::Greedy ? static_cast<MatchingPolicy&>(greedy) : patient;
      const auto trace = simulate(cfg, policy);
      const auto oracle = matchsim::testing::fixed_step_run(cfg, kind);
      REQUIRE(oracle.size() == trace.per_agent.size());
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        const auto& r = trace.per_agent[i];
        if (!(oracle[i] == matchsim::testing::OracleOutcome{r.outcome, r.partner, r.resolution})) ++mismatches;
      }
      CHECK(mismatches == 0);
    }
  }
}

TEST_CASE("malformed policy hooks abort the run") {
  struct Lazy final : MatchingPolicy {
    void on_arrival(Market&, AgentId) override {}
    void on_critical(Market&, AgentId) override {}
  };
  Lazy lazy;
  CHECK_THROWS_AS(simulate(small_market(1), lazy), std::logic_error);
}
