#include "fixed_step_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

namespace matchsim::testing {

std::vector<OracleOutcome> fixed_step_run(const MarketConfig& cfg, PolicyKind kind, double dt) {
  RngStreams streams(cfg.seed);
  const std::vector<ArrivalDraw> draws = sample_arrivals(cfg, streams);
  const CompatibilityGraph compatible(cfg.p, streams.compatibility_key);
  std::mt19937_64 selection(derive_seed(cfg.seed, "selection"));

  std::vector<OracleOutcome> out(draws.size());
  std::vector<bool> resolved(draws.size(), false);
  std::set<AgentId> waiting;

  auto partners_of = [&](AgentId id) {
    std::vector<AgentId> c;
    for (AgentId other : waiting) {
      if (other != id && compatible(id, other)) c.push_back(other);
    }
    return c;
  };
  auto choose = [&](const std::vector<AgentId>& c) {
    if (c.size() == 1) return c.front();
    std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
    return c[pick(selection)];
  };
  auto settle = [&](AgentId id, Outcome o, AgentId partner, double t) {
    out[id] = {o, partner, t};
    resolved[id] = true;
    waiting.erase(id);
  };

  const auto steps = static_cast<std::size_t>(std::ceil(cfg.horizon / dt));
  std::size_t next_arrival = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double lo = static_cast<double>(k) * dt;
    const double hi = std::min(static_cast<double>(k + 1) * dt, cfg.horizon);
    // (time, 0 = arrival / 1 = critical, agent)
    std::vector<std::tuple<double, int, AgentId>> due;
    while (next_arrival < draws.size() && draws[next_arrival].time <= hi) {
      due.emplace_back(draws[next_arrival].time, 0, static_cast<AgentId>(next_arrival));
      ++next_arrival;
    }
    for (AgentId id = 0; id < next_arrival; ++id) {
      const double crit = draws[id].time + draws[id].sojourn;
      if (!resolved[id] && crit > lo && crit <= hi) due.emplace_back(crit, 1, id);
    }
    std::sort(due.begin(), due.end());
    for (const auto& [t, type, id] : due) {
      if (resolved[id]) continue;
      if (type == 0) {
        if (kind == PolicyKind::Greedy) {
          const auto c = partners_of(id);
          if (c.empty()) {
            waiting.insert(id);
          } else {
            const AgentId partner = choose(c);
            settle(id, Outcome::Matched, partner, t);
            settle(partner, Outcome::Matched, id, t);
          }
        } else {
          waiting.insert(id);
        }
      } else {
        const auto c = partners_of(id);
        if (c.empty()) {
          settle(id, Outcome::Perished, kNoAgent, t);
        } else {
          const AgentId partner = choose(c);
          settle(id, Outcome::Matched, partner, t);
          settle(partner, Outcome::Matched, id, t);
        }
      }
    }
  }
  for (AgentId id = 0; id < out.size(); ++id) {
    if (!resolved[id]) out[id] = {Outcome::Unresolved, kNoAgent, cfg.horizon};
  }
  return out;
}

}  // namespace matchsim::testing
