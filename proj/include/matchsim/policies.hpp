#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "matchsim/estimation.hpp"
#include "matchsim/market.hpp"

namespace matchsim {

/// Greedy arrival: match with a uniformly chosen compatible waiting agent,
/// else join the pool. Returns the partner when a match happened.
std::optional<AgentId> greedy_on_arrival(Market& market, AgentId id);

/// Patient criticality: match with a uniformly chosen compatible waiting
/// agent, else perish. Returns the partner when a match happened.
std::optional<AgentId> patient_on_critical(Market& market, AgentId id);

class GreedyPolicy final : public MatchingPolicy {
 public:
  void on_arrival(Market& market, AgentId id) override { greedy_on_arrival(market, id); }
  // A critical agent still tries the pool. Under pure Greedy the pool is an
  // independent set, so this only matters for agents carried over by a switch.
  void on_critical(Market& market, AgentId id) override { patient_on_critical(market, id); }
  std::optional<PolicyKind> static_kind() const override { return PolicyKind::Greedy; }
};

class PatientPolicy final : public MatchingPolicy {
 public:
  void on_arrival(Market& market, AgentId id) override { market.join_pool(id); }
  void on_critical(Market& market, AgentId id) override { patient_on_critical(market, id); }
  std::optional<PolicyKind> static_kind() const override { return PolicyKind::Patient; }
};

/// Anything that maps departure parameters to a predicted loss gap.
class GapPredictor {
 public:
  virtual ~GapPredictor() = default;
  virtual double score(const LogNormalParams& params) const = 0;
  /// Decision rule: Patient iff the predicted gap reaches tau.
  virtual bool prefers_patient(const LogNormalParams& params, double tau) const {
    return score(params) >= tau;
  }
};

class ConstantGap final : public GapPredictor {
 public:
  explicit ConstantGap(double value) : value_(value) {}
  double score(const LogNormalParams&) const override { return value_; }

 private:
  double value_;
};

/// Which observations feed the window estimate.
enum class SampleSource {
  ReportedSojourn,    // sojourn X_i reported by every agent arriving in the window
  ObservedDeparture,  // sojourns of agents that perished during the window
};

struct HybridConfig {
  double tau = 0.10;
  double window = 0.3;
  const GapPredictor* gap_model = nullptr;
  std::size_t min_samples = 2;
  PolicyKind initial_policy = PolicyKind::Patient;
  SampleSource source = SampleSource::ReportedSojourn;

  void validate() const;
};

struct BoundaryDecision {
  PolicyKind kind = PolicyKind::Patient;
  bool estimated = false;
  LogNormalParams estimate{};
  double score = 0.0;
};

/// Window-boundary step of the hybrid controller. Keeps `incumbent` when the
/// batch is smaller than min_samples.
BoundaryDecision hybrid_on_boundary(const SampleBatch& batch, const HybridConfig& cfg, PolicyKind incumbent);

class HybridPolicy final : public MatchingPolicy {
 public:
  explicit HybridPolicy(HybridConfig cfg);

  void on_arrival(Market& market, AgentId id) override;
  void on_critical(Market& market, AgentId id) override;
  void on_window_boundary(Market& market, std::size_t window) override;
  std::optional<double> window_size() const override { return cfg_.window; }

  PolicyKind active() const noexcept { return active_; }
  const SampleBatch& batch() const noexcept { return batch_; }

 private:
  HybridConfig cfg_;
  PolicyKind active_;
  SampleBatch batch_;
};

}  // namespace matchsim
