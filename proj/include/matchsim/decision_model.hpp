#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "matchsim/gap_model.hpp"
#include "matchsim/market.hpp"

namespace matchsim {

/// Scores at or beyond this value are stored capped (and flagged).
inline constexpr double kScoreCap = 10.0;

struct GapSample {
  double mu = 0.0;
  double sigma = 0.0;
  double loss_greedy = 0.0;
  double loss_patient = 0.0;
  double score = 0.0;  // +inf when Patient loses nobody but Greedy does
  std::size_t k = 1;
  double d = 0.0;
  bool capped = false;
};

/// Simulation settings for labeling. p is derived as density / lambda.
struct OracleConfig {
  double lambda = 100.0;
  double horizon = 100.0;
  double mixing = 50.0;
  double density = 8.0;
  std::size_t runs = 10;
  std::uint64_t seed = 20240601;
  std::size_t workers = 1;

  MarketConfig market(const LogNormalParams& departure, std::uint64_t run_seed) const;
  void validate() const;
};

/// Seed of run `run` for every grid point. Shared across points so the whole
/// surface is labeled with common random numbers.
std::uint64_t oracle_run_seed(const OracleConfig& cfg, std::size_t run);

/// Paired Greedy/Patient runs (same seeds, same compatibility graph), averaged
/// over cfg.runs. score = L_greedy / L_patient - 1, 0 when both are 0.
GapSample score_oracle(const LogNormalParams& params, const OracleConfig& cfg);

struct GridSpec {
  double mu_min = -2.0;
  double mu_max = 2.0;
  double mu_step = 0.2;
  double sigma_min = 0.05;
  double sigma_max = 2.0;
  double sigma_step = 0.05;

  std::vector<double> mu_values() const;
  std::vector<double> sigma_values() const;
  std::size_t size() const { return mu_values().size() * sigma_values().size(); }
  void validate() const;
};

/// One sample per grid point, mu-major (all sigmas of the first mu first).
/// Infinite scores are capped at kScoreCap and flagged.
std::vector<GapSample> build_training_grid(const GridSpec& grid, const OracleConfig& cfg);

std::vector<TrainingExample> to_training_examples(std::span<const GapSample> samples);

void write_dataset(const std::filesystem::path& path, std::span<const GapSample> samples,
                   const std::string& fingerprint = {});
std::vector<GapSample> read_dataset(const std::filesystem::path& path);

struct ContourPoint {
  double sigma = 0.0;
  double mu = 0.0;
};

/// Crossings of value(mu, sigma) = tau along each sigma grid line, linearly
/// interpolated between adjacent mu grid points. Lines without a crossing
/// contribute nothing.
std::vector<ContourPoint> contour_crossings(const GridSpec& grid, double tau,
                                            const std::function<double(double mu, double sigma)>& value);

std::vector<ContourPoint> extract_decision_boundary(const GapPredictor& model, double tau, const GridSpec& grid);

/// Contour of tabulated oracle scores (samples laid out as build_training_grid).
std::vector<ContourPoint> oracle_boundary(std::span<const GapSample> samples, double tau, const GridSpec& grid);

struct BoundaryComparison {
  double mean_abs_mu_displacement = std::numeric_limits<double>::infinity();
  std::size_t compared_lines = 0;
  std::size_t unmatched_lines = 0;  // lines where exactly one contour crosses
};

/// For each sigma line crossed by both contours, every reference crossing is
/// paired with the nearest candidate crossing on the same line.
BoundaryComparison compare_boundaries(std::span<const ContourPoint> reference, std::span<const ContourPoint> candidate);

}  // namespace matchsim
