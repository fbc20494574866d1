#include "matchsim/policies.hpp"

#include <algorithm>
#include <cmath>

namespace matchsim {

std::optional<AgentId> greedy_on_arrival(Market& market, AgentId id) {
  const auto candidates = market.compatible_partners(id);
  if (candidates.empty()) {
    market.join_pool(id);
    return std::nullopt;
  }
  const AgentId partner = market.pick_uniform(candidates);
  market.match(id, partner);
  return partner;
}

std::optional<AgentId> patient_on_critical(Market& market, AgentId id) {
  const auto candidates = market.compatible_partners(id);
  if (candidates.empty()) {
    market.perish(id);
    return std::nullopt;
  }
  const AgentId partner = market.pick_uniform(candidates);
  market.match(id, partner);
  return partner;
}

void HybridConfig::validate() const {
  if (!(window > 0.0) || !std::isfinite(window)) throw ConfigError("hybrid window must be > 0");
  if (!(tau >= 0.0)) throw ConfigError("hybrid tau must be >= 0");
  if (min_samples < 2) throw ConfigError("hybrid min_samples must be >= 2");
  if (gap_model == nullptr) throw ConfigError("hybrid policy needs a gap model");
}

BoundaryDecision hybrid_on_boundary(const SampleBatch& batch, const HybridConfig& cfg, PolicyKind incumbent) {
  BoundaryDecision d;
  d.kind = incumbent;
  if (batch.values.size() < std::max<std::size_t>(cfg.min_samples, 2)) return d;
  d.estimated = true;
  d.estimate = fit_lognormal(batch);
  const LogNormalParams model_input{d.estimate.mu, std::max(d.estimate.sigma, kMinModelSigma)};
  d.score = cfg.gap_model->score(model_input);
  d.kind = cfg.gap_model->prefers_patient(model_input, cfg.tau) ? PolicyKind::Patient : PolicyKind::Greedy;
  return d;
}

HybridPolicy::HybridPolicy(HybridConfig cfg) : cfg_(cfg), active_(cfg.initial_policy) { cfg_.validate(); }

void HybridPolicy::on_arrival(Market& market, AgentId id) {
  if (cfg_.source == SampleSource::ReportedSojourn) batch_.values.push_back(market.agent(id).sojourn);
  if (active_ == PolicyKind::Greedy) {
    greedy_on_arrival(market, id);
  } else {
    market.join_pool(id);
  }
}

void HybridPolicy::on_critical(Market& market, AgentId id) {
  patient_on_critical(market, id);
  if (cfg_.source == SampleSource::ObservedDeparture && market.agent(id).status == AgentStatus::Perished) {
    batch_.values.push_back(market.agent(id).sojourn);
  }
}

void HybridPolicy::on_window_boundary(Market& market, std::size_t window) {
  const BoundaryDecision d = hybrid_on_boundary(batch_, cfg_, active_);
  active_ = d.kind;
  market.record_window({window, market.now(), d.kind, d.estimated, d.estimate.mu, d.estimate.sigma, d.score,
                        batch_.values.size()});
  batch_.values.clear();
  batch_.window_index = window + 1;
}

}  // namespace matchsim
