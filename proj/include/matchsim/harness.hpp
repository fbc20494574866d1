#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "matchsim/decision_model.hpp"
#include "matchsim/gap_model.hpp"
#include "matchsim/metrics.hpp"
#include "matchsim/policies.hpp"
#include "matchsim/settings.hpp"

namespace matchsim {

enum class PolicySelector { Greedy, Patient, Hybrid };

/// One policy variant of an experiment. Hybrid variants may pin tau;
/// otherwise the experiment's hybrid settings apply.
struct PolicySpec {
  PolicySelector selector = PolicySelector::Patient;
  std::optional<double> tau;

  std::string label() const;
  static PolicySpec parse(const std::string& text);  // greedy | patient | hybrid | hybrid@<tau>
};

enum class SweepAxis { None, Density, Tau, Window, Mu, Sigma };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& text);

struct HybridSettings {
  double tau = 0.10;
  double window = 0.3;
  std::size_t min_samples = 2;
  SampleSource source = SampleSource::ReportedSojourn;
  PolicyKind initial = PolicyKind::Patient;
};

struct ExperimentConfig {
  MarketConfig market;
  std::optional<double> density;  // when set, p = density / lambda
  std::vector<PolicySpec> policies{{PolicySelector::Greedy, std::nullopt}, {PolicySelector::Patient, std::nullopt}, {PolicySelector::Hybrid, std::nullopt}};
  HybridSettings hybrid;
  std::size_t k = 10;
  SweepAxis axis = SweepAxis::None;
  std::vector<double> sweep_values;
  std::optional<double> usage_from;
  std::optional<double> usage_to;
  std::uint64_t seed = 20240601;
  std::size_t workers = 1;
  std::string fingerprint;

  /// Market of sweep point `point` (axis value applied), seed left unset.
  MarketConfig market_at(std::size_t point) const;
  HybridSettings hybrid_at(std::size_t point, const PolicySpec& spec) const;
  std::size_t points() const { return axis == SweepAxis::None ? 1 : sweep_values.size(); }
  bool needs_model() const;
  void validate() const;
};

ExperimentConfig experiment_from_settings(const Settings& s);
GridSpec grid_from_settings(const Settings& s);
OracleConfig oracle_from_settings(const Settings& s);
TrainHyperparams train_from_settings(const Settings& s);

/// One CSV row per (sweep point, policy variant): mean and standard error over k runs.
struct SweepRow {
  std::string policy;
  std::optional<double> tau;
  std::optional<double> w;
  double d = 0.0;
  double lambda = 0.0;
  double T = 0.0;
  double T0 = 0.0;
  std::size_t k = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double loss_mean = 0.0, loss_se = 0.0;
  double wait_mean = 0.0, wait_se = 0.0;
  double congestion_mean = 0.0, congestion_se = 0.0;
  double usage_patient = 0.0, usage_greedy = 0.0;
  double switch_count_mean = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation / sqrt(n); 0 for n < 2
};
MeanSe mean_se(const std::vector<double>& xs);

/// Builds the policy object for one run; `model` must outlive it.
std::unique_ptr<MatchingPolicy> make_policy(const PolicySpec& spec, const HybridSettings& hybrid,
                                            const GapPredictor* model);

/// Runs k seeded runs for every (sweep point, policy). Run r of point i uses
/// derive_run_seed(seed, i, r) under every policy, so variants are paired.
std::vector<SweepRow> run_experiment(const ExperimentConfig& cfg, const GapPredictor* model);

/// Per-run metrics of one (point, policy) cell, as aggregated into a SweepRow.
std::vector<MetricsReport> run_cell(const ExperimentConfig& cfg, std::size_t point, const PolicySpec& spec,
                                    const GapPredictor* model);

extern const char* const kSweepHeader;
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& fingerprint);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& fingerprint);

struct HeatmapResult {
  std::vector<GapSample> samples;
  std::vector<std::pair<double, ContourPoint>> oracle_contours;  // (tau, point)
  std::vector<std::pair<double, ContourPoint>> fitted_contours;
};

/// Oracle scores over the grid (or the given precomputed samples) with
/// oracle and fitted contours at each tau. Writes heatmap.csv,
/// contours_oracle.csv and contours_fitted.csv into `out_dir`.
HeatmapResult run_heatmap(const GridSpec& grid, const OracleConfig& oracle, const std::vector<double>& taus,
                          const GapPredictor* model, const std::filesystem::path& out_dir,
                          const std::string& fingerprint, const std::vector<GapSample>* precomputed = nullptr);

struct CalibrationResult {
  std::vector<GapSample> dataset;
  TrainResult trained;
};

/// Labels the grid, trains the gap model, and writes dataset.csv, the model
/// file and train_report.json.
CalibrationResult run_calibration(const GridSpec& grid, const OracleConfig& oracle, const TrainHyperparams& hp,
                                  const std::filesystem::path& model_path,
                                  const std::filesystem::path& dataset_path, const std::string& fingerprint);

nlohmann::json to_json(const TrainReport& report);

extern const char* const kScheduleHeader;

/// Windows of a single hybrid run that start in [from, to) (see select_windows).
std::vector<WindowRecord> schedule_rows(const TraceSummary& trace, double from, double to);
std::string schedule_csv(const std::vector<WindowRecord>& rows, const std::string& fingerprint);

/// One hybrid run (seed derived from (seed, 0, 0)) and its schedule restricted
/// to [from, to).
TraceSummary run_schedule_report(const ExperimentConfig& cfg, const GapPredictor& model, double from, double to,
                                 const std::filesystem::path& out_path);

nlohmann::json to_json(const TraceSummary& trace);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& m);

/// Writes text to a file, throwing std::runtime_error with the path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace matchsim
