#include "matchsim/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace matchsim {

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::Greedy ? "greedy" : "patient";
}

PolicyKind parse_policy_kind(const std::string& text) {
  if (text == "greedy" || text == "Greedy") return PolicyKind::Greedy;
  if (text == "patient" || text == "Patient") return PolicyKind::Patient;
  throw ConfigError("unknown policy kind '" + text + "'");
}

void MarketConfig::validate() const {
  std::ostringstream err;
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) err << "lambda must be finite and >= 0; ";
  if (!(p >= 0.0 && p <= 1.0)) err << "p must lie in [0, 1]; ";
  if (!(horizon > 0.0) || !std::isfinite(horizon)) err << "T must be finite and > 0; ";
  if (!(mixing >= 0.0 && mixing < horizon)) err << "T0 must satisfy 0 <= T0 < T; ";
  if (!(departure.sigma >= 0.0) || !std::isfinite(departure.sigma)) err << "sigma must be >= 0; ";
  if (!std::isfinite(departure.mu)) err << "mu must be finite; ";
  if (const auto msg = err.str(); !msg.empty()) throw ConfigError("invalid market config: " + msg);
}

bool are_compatible(AgentId i, AgentId j, double p, std::uint64_t key) {
  if (i == j) throw std::invalid_argument("compatibility of an agent with itself is undefined");
  return CompatibilityGraph(p, key)(i, j);
}

CompatibilityGraph::CompatibilityGraph(double p, std::uint64_t key) : p_(p), key_(key) {
  if (p >= 1.0) {
    always_ = true;
  } else if (p <= 0.0) {
    never_ = true;
  } else {
    // P(bits < threshold) = threshold / 2^64 = p.
    threshold_ = static_cast<std::uint64_t>(std::ldexp(p, 64));
  }
}

void Pool::insert(AgentId id) {
  const auto it = std::lower_bound(members_.begin(), members_.end(), id);
  if (it != members_.end() && *it == id) throw std::logic_error("agent already in pool");
  members_.insert(it, id);
}

void Pool::erase(AgentId id) {
  const auto it = std::lower_bound(members_.begin(), members_.end(), id);
  if (it == members_.end() || *it != id) throw std::logic_error("agent not in pool");
  members_.erase(it);
}

bool Pool::contains(AgentId id) const {
  return std::binary_search(members_.begin(), members_.end(), id);
}

std::vector<ArrivalDraw> sample_arrivals(const MarketConfig& cfg, RngStreams& streams) {
  std::vector<ArrivalDraw> out;
  if (cfg.lambda <= 0.0) return out;
  out.reserve(static_cast<std::size_t>(cfg.lambda * cfg.horizon * 1.1) + 16);
  std::exponential_distribution<double> gap(cfg.lambda);
  std::normal_distribution<double> z(0.0, 1.0);
  double t = 0.0;
  for (;;) {
    t += gap(streams.arrivals);
    if (t > cfg.horizon) break;
    double sojourn = std::exp(cfg.departure.mu + cfg.departure.sigma * z(streams.sojourns));
    if (!(sojourn > 0.0)) sojourn = std::numeric_limits<double>::min();
    out.push_back({t, sojourn});
  }
  return out;
}

std::vector<double> window_starts(double horizon, double window) {
  if (!(window > 0.0)) throw ConfigError("window size must be > 0");
  // The epsilon keeps exact divisions (T = 100, w = 0.1) from gaining a window.
  const auto count = static_cast<std::size_t>(std::ceil(horizon / window - 1e-9));
  std::vector<double> starts(std::max<std::size_t>(count, 1));
  for (std::size_t k = 0; k < starts.size(); ++k) starts[k] = static_cast<double>(k) * window;
  return starts;
}

EventCalendar::EventCalendar(std::span<const ArrivalDraw> arrivals, std::span<const double> boundaries) {
  events_.reserve(2 * arrivals.size() + boundaries.size());
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    events_.push_back({boundaries[k], EventKind::WindowBoundary, k});
  }
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    events_.push_back({arrivals[i].time, EventKind::Arrival, i});
    events_.push_back({arrivals[i].time + arrivals[i].sojourn, EventKind::Critical, i});
  }
  std::sort(events_.begin(), events_.end());
}

std::optional<Event> EventCalendar::next() {
  if (cursor_ >= events_.size()) return std::nullopt;
  return events_[cursor_++];
}

EventCalendar build_event_calendar(const MarketConfig& cfg, RngStreams& streams,
                                   std::optional<double> window) {
  cfg.validate();
  const auto arrivals = sample_arrivals(cfg, streams);
  std::vector<double> boundaries;
  if (window) boundaries = window_starts(cfg.horizon, *window);
  return EventCalendar(arrivals, boundaries);
}

Market::Market(const MarketConfig& cfg, RngStreams& streams)
    : cfg_(cfg), streams_(streams), compat_(cfg.p, streams.compatibility_key) {
  pool_sizes_.push_back({0.0, 0});
}

std::vector<AgentId> Market::compatible_partners(AgentId id) const {
  std::vector<AgentId> out;
  for (AgentId other : pool_.members()) {
    if (other != id && compat_(id, other)) out.push_back(other);
  }
  return out;
}

AgentId Market::pick_uniform(std::span<const AgentId> candidates) {
  if (candidates.empty()) throw std::logic_error("pick_uniform on an empty candidate set");
  if (candidates.size() == 1) return candidates.front();
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(streams_.selection)];
}

AgentId Market::admit(const ArrivalDraw& draw) {
  const auto id = static_cast<AgentId>(agents_.size());
  agents_.push_back(Agent{id, draw.time, draw.sojourn, draw.time + draw.sojourn,
                          AgentStatus::Waiting, kNoAgent, 0.0});
  return id;
}

void Market::join_pool(AgentId id) {
  if (agents_.at(id).status != AgentStatus::Waiting) throw std::logic_error("resolved agent cannot join the pool");
  pool_.insert(id);
  note_pool_size();
}

void Market::resolve(AgentId id, AgentStatus status, AgentId partner) {
  Agent& a = agents_.at(id);
  if (a.status != AgentStatus::Waiting) throw std::logic_error("agent resolved twice");
  a.status = status;
  a.partner = partner;
  a.resolution_time = now_;
  if (pool_.contains(id)) pool_.erase(id);
}

void Market::match(AgentId a, AgentId b) {
  if (a == b) throw std::logic_error("agent matched with itself");
  resolve(a, AgentStatus::Matched, b);
  resolve(b, AgentStatus::Matched, a);
  note_pool_size();
}

void Market::perish(AgentId id) {
  resolve(id, AgentStatus::Perished, kNoAgent);
  note_pool_size();
}

void Market::record_window(const WindowRecord& record) { schedule_.push_back(record); }

void Market::note_pool_size() {
  if (pool_sizes_.back().size == pool_.size()) return;
  if (pool_sizes_.back().time == now_) {
    pool_sizes_.back().size = pool_.size();
    // Collapse a change that was undone at the same instant.
    if (pool_sizes_.size() > 1 && pool_sizes_[pool_sizes_.size() - 2].size == pool_.size()) pool_sizes_.pop_back();
  } else {
    pool_sizes_.push_back({now_, pool_.size()});
  }
}

namespace {

void tally(Counters& c, Outcome outcome) {
  ++c.arrivals;
  switch (outcome) {
    case Outcome::Matched: ++c.matched; break;
    case Outcome::Perished: ++c.perished; break;
    case Outcome::Unresolved: ++c.remaining; break;
  }
}

}  // namespace

TraceSummary Market::finish(std::optional<PolicyKind> static_policy) const {
  TraceSummary trace;
  trace.horizon = cfg_.horizon;
  trace.mixing = cfg_.mixing;
  trace.pool_sizes = pool_sizes_;
  trace.policy_schedule = schedule_;
  trace.static_policy = static_policy;
  trace.per_agent.reserve(agents_.size());
  for (const Agent& a : agents_) {
    AgentRecord r{a.id, a.arrival_time, a.sojourn, cfg_.horizon, Outcome::Unresolved, a.partner};
    if (a.status == AgentStatus::Matched) {
      r.outcome = Outcome::Matched;
      r.resolution = a.resolution_time;
    } else if (a.status == AgentStatus::Perished) {
      r.outcome = Outcome::Perished;
      r.resolution = a.resolution_time;
    }
    tally(trace.full, r.outcome);
    if (a.arrival_time >= cfg_.mixing) tally(trace.cohort, r.outcome);
    trace.per_agent.push_back(r);
  }
  return trace;
}

TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy) {
  RngStreams streams(cfg.seed);
  return simulate(cfg, policy, streams);
}

namespace {

TraceSummary run_event_loop(const MarketConfig& cfg, MatchingPolicy& policy, RngStreams& streams,
                            std::span<const ArrivalDraw> draws) {
  std::vector<double> boundaries;
  if (const auto w = policy.window_size()) boundaries = window_starts(cfg.horizon, *w);
  EventCalendar calendar(draws, boundaries);

  Market market(cfg, streams);
  while (auto event = calendar.next()) {
    if (event->time > cfg.horizon) break;
    market.advance_to(event->time);
    switch (event->kind) {
      case EventKind::WindowBoundary:
        policy.on_window_boundary(market, static_cast<std::size_t>(event->seq));
        break;
      case EventKind::Arrival: {
        const AgentId id = market.admit(draws[event->seq]);  // ids follow draw order
        policy.on_arrival(market, id);
        const Agent& a = market.agent(id);
        if (a.status == AgentStatus::Perished ||
            (a.status == AgentStatus::Waiting && !market.pool().contains(id))) {
          throw std::logic_error("policy left arriving agent " + std::to_string(id) +
                                 " neither matched nor pooled");
        }
        break;
      }
      case EventKind::Critical: {
        const auto id = static_cast<AgentId>(event->seq);
        if (market.agent(id).status != AgentStatus::Waiting) break;  // lazily invalidated
        policy.on_critical(market, id);
        if (market.agent(id).status == AgentStatus::Waiting) {
          throw std::logic_error("policy left critical agent " + std::to_string(id) + " unresolved");
        }
        break;
      }
    }
  }
  market.advance_to(cfg.horizon);
  return market.finish(policy.static_kind());
}

}  // namespace

TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy, RngStreams& streams) {
  cfg.validate();
  const auto draws = sample_arrivals(cfg, streams);
  return run_event_loop(cfg, policy, streams, draws);
}

TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy, std::span<const ArrivalDraw> arrivals) {
  cfg.validate();
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    if (!(arrivals[i].sojourn > 0.0)) throw ConfigError("scripted sojourns must be > 0");
    if (i > 0 && !(arrivals[i].time > arrivals[i - 1].time)) throw ConfigError("scripted arrivals must be strictly increasing");
  }
  RngStreams streams(cfg.seed);
  return run_event_loop(cfg, policy, streams, arrivals);
}

}  // namespace matchsim
