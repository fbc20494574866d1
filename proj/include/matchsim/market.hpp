#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchsim/rng.hpp"

namespace matchsim {

/// Invalid user-supplied configuration (maps to CLI exit code 1).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using AgentId = std::uint32_t;
inline constexpr AgentId kNoAgent = static_cast<AgentId>(-1);

enum class PolicyKind { Greedy, Patient };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& text);

/// Log-normal departure law: log(sojourn) ~ Normal(mu, sigma^2).
struct LogNormalParams {
  double mu = 0.0;
  double sigma = 0.0;

  bool operator==(const LogNormalParams&) const = default;
};

struct MarketConfig {
  double lambda = 100.0;   // arrivals per unit time
  double p = 0.08;         // pairwise compatibility probability
  double horizon = 100.0;  // T
  double mixing = 50.0;    // T0, start of the measurement window
  std::uint64_t seed = 1;
  LogNormalParams departure{};

  /// Expected number of compatible counterparts arriving per unit time.
  double density() const { return p * lambda; }

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

enum class AgentStatus { Waiting, Matched, Perished };

struct Agent {
  AgentId id = 0;
  double arrival_time = 0.0;
  double sojourn = 0.0;
  double critical_time = 0.0;
  AgentStatus status = AgentStatus::Waiting;
  AgentId partner = kNoAgent;
  double resolution_time = 0.0;  // valid once status != Waiting
};

/// Pair-deterministic Bernoulli(p) compatibility. The boolean for {i, j}
/// depends only on (key, min(i,j), max(i,j)); throws std::invalid_argument
/// when i == j.
bool are_compatible(AgentId i, AgentId j, double p, std::uint64_t key);

/// Stateless form of the compatibility graph of one run.
class CompatibilityGraph {
 public:
  CompatibilityGraph(double p, std::uint64_t key);

  bool operator()(AgentId i, AgentId j) const noexcept {
    if (always_) return true;
    if (never_) return false;
    const auto [lo, hi] = std::minmax(i, j);
    return pair_bits(lo, hi) < threshold_;
  }

  std::uint64_t key() const noexcept { return key_; }
  double p() const noexcept { return p_; }

 private:
  std::uint64_t pair_bits(AgentId lo, AgentId hi) const noexcept {
    return mix64(mix64(key_ ^ mix64(lo)) ^ hi);
  }

  double p_;
  std::uint64_t key_;
  std::uint64_t threshold_ = 0;
  bool always_ = false;
  bool never_ = false;
};

/// Currently waiting agents (Z_t), kept sorted by id.
class Pool {
 public:
  void insert(AgentId id);
  void erase(AgentId id);
  bool contains(AgentId id) const;
  std::size_t size() const noexcept { return members_.size(); }
  std::span<const AgentId> members() const noexcept { return members_; }

 private:
  std::vector<AgentId> members_;
};

enum class EventKind : std::uint8_t { WindowBoundary = 0, Arrival = 1, Critical = 2 };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t seq = 0;  // agent id, or window index for boundaries

  friend bool operator<(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.seq < b.seq;
  }
};

struct ArrivalDraw {
  double time = 0.0;
  double sojourn = 0.0;
};

/// Poisson arrivals on [0, T] with log-normal sojourns, drawn from the
/// arrivals and sojourns streams respectively.
std::vector<ArrivalDraw> sample_arrivals(const MarketConfig& cfg, RngStreams& streams);

/// Start times k*w, k = 0 .. ceil(T/w)-1.
std::vector<double> window_starts(double horizon, double window);

/// All events of a run, in (time, kind, seq) order.
class EventCalendar {
 public:
  EventCalendar(std::span<const ArrivalDraw> arrivals, std::span<const double> boundaries);

  std::optional<Event> next();
  std::size_t size() const noexcept { return events_.size(); }
  std::span<const Event> events() const noexcept { return events_; }

 private:
  std::vector<Event> events_;
  std::size_t cursor_ = 0;
};

EventCalendar build_event_calendar(const MarketConfig& cfg, RngStreams& streams,
                                   std::optional<double> window = std::nullopt);

enum class Outcome { Matched, Perished, Unresolved };

struct AgentRecord {
  AgentId id = 0;
  double arrival = 0.0;
  double sojourn = 0.0;
  double resolution = 0.0;  // horizon T when unresolved
  Outcome outcome = Outcome::Unresolved;
  AgentId partner = kNoAgent;

  bool operator==(const AgentRecord&) const = default;
};

struct WindowRecord {
  std::size_t index = 0;
  double start = 0.0;
  PolicyKind kind = PolicyKind::Patient;
  bool estimated = false;  // false when the incumbent was retained for lack of data
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double score_hat = 0.0;
  std::size_t batch_size = 0;

  bool operator==(const WindowRecord&) const = default;
};

/// A = M + D + Z_T, with M counting matched agents (two per match).
struct Counters {
  std::size_t arrivals = 0;
  std::size_t matched = 0;
  std::size_t perished = 0;
  std::size_t remaining = 0;

  bool operator==(const Counters&) const = default;
};

struct PoolSizePoint {
  double time = 0.0;
  std::size_t size = 0;

  bool operator==(const PoolSizePoint&) const = default;
};

struct TraceSummary {
  double horizon = 0.0;
  double mixing = 0.0;
  Counters full;    // every agent arriving in [0, T]
  Counters cohort;  // agents arriving in [T0, T]
  std::vector<PoolSizePoint> pool_sizes;  // right-continuous step function
  std::vector<AgentRecord> per_agent;
  std::vector<WindowRecord> policy_schedule;
  std::optional<PolicyKind> static_policy;

  bool operator==(const TraceSummary&) const = default;
};

class Market;

/// Event hooks a matching policy implements. Hooks run with the market clock
/// set to the event time.
class MatchingPolicy {
 public:
  virtual ~MatchingPolicy() = default;

  /// The arriving agent must end up either matched or in the pool.
  virtual void on_arrival(Market& market, AgentId id) = 0;
  /// The critical agent must end up resolved (matched or perished).
  virtual void on_critical(Market& market, AgentId id) = 0;
  virtual void on_window_boundary(Market& /*market*/, std::size_t /*window*/) {}

  /// Requests boundary events every w time units when set.
  virtual std::optional<double> window_size() const { return std::nullopt; }
  /// Set for static policies; reported as the usage tag.
  virtual std::optional<PolicyKind> static_kind() const { return std::nullopt; }
};

/// Mutable state of one run. Policies act on it through the operations below.
class Market {
 public:
  Market(const MarketConfig& cfg, RngStreams& streams);

  double now() const noexcept { return now_; }
  const MarketConfig& config() const noexcept { return cfg_; }
  const Agent& agent(AgentId id) const { return agents_.at(id); }
  const Pool& pool() const noexcept { return pool_; }
  const CompatibilityGraph& compatibility() const noexcept { return compat_; }

  /// Waiting agents compatible with `id`, ascending by id.
  std::vector<AgentId> compatible_partners(AgentId id) const;
  /// Uniform choice; draws from the selection stream only with >= 2 candidates.
  AgentId pick_uniform(std::span<const AgentId> candidates);

  void join_pool(AgentId id);
  void match(AgentId a, AgentId b);
  void perish(AgentId id);
  void record_window(const WindowRecord& record);

  // Driven by simulate().
  AgentId admit(const ArrivalDraw& draw);
  void advance_to(double time) noexcept { now_ = time; }
  TraceSummary finish(std::optional<PolicyKind> static_policy) const;

 private:
  void resolve(AgentId id, AgentStatus status, AgentId partner);
  void note_pool_size();

  MarketConfig cfg_;
  RngStreams& streams_;
  CompatibilityGraph compat_;
  double now_ = 0.0;
  std::vector<Agent> agents_;
  Pool pool_;
  std::vector<PoolSizePoint> pool_sizes_;
  std::vector<WindowRecord> schedule_;
};

/// Runs `policy` over [0, T] from an empty pool. Events after T are not
/// processed; agents still waiting at T count toward Z_T.
TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy);
TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy, RngStreams& streams);
/// Same loop over a given arrival sequence (sorted by time); the sampling
/// streams are bypassed, compatibility and selection still derive from cfg.seed.
TraceSummary simulate(const MarketConfig& cfg, MatchingPolicy& policy, std::span<const ArrivalDraw> arrivals);

}  // namespace matchsim
