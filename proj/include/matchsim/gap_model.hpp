#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "matchsim/policies.hpp"

namespace matchsim {

enum class ModelMode {
  RegressScore,   // predicts the gap score; tau is applied at decision time
  ClassifyAtTau,  // predicts P(score >= training tau)
};

std::string to_string(ModelMode mode);
ModelMode parse_model_mode(const std::string& text);

/// Output link of the regressor: the network fits link(score). The asinh
/// link is linear within ~scale of zero and logarithmic beyond, so the
/// decision-relevant small gaps are not swamped by capped large ones.
enum class TargetLink { Identity, Asinh };

std::string to_string(TargetLink link);
TargetLink parse_target_link(const std::string& text);

/// Per-coordinate training range; inputs are clamped into it before inference.
struct InputBox {
  double mu_min = -2.0;
  double mu_max = 2.0;
  double sigma_min = 0.05;
  double sigma_max = 2.0;

  LogNormalParams clamp(const LogNormalParams& x) const;
  bool degenerate() const { return !(mu_max > mu_min) || !(sigma_max > sigma_min); }
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;
};

/// Fully connected network, tanh hidden units, identity (regression) or
/// logistic (classification) output. Immutable once trained.
class GapModel final : public GapPredictor {
 public:
  static constexpr int kFormatVersion = 1;

  GapModel() = default;
  /// Xavier-uniform initialization from `init_seed`.
  GapModel(std::vector<std::size_t> layer_sizes, InputBox box, ModelMode mode, double train_tau,
           std::uint64_t init_seed);

  /// Regression: predicted score. Classification: probability of Patient.
  double score(const LogNormalParams& params) const override;
  bool prefers_patient(const LogNormalParams& params, double tau) const override;

  /// Raw network output on an already normalized input (pre-denormalization,
  /// pre-logistic).
  double forward_normalized(double x0, double x1) const;
  std::array<double, 2> normalize(const LogNormalParams& params) const;

  ModelMode mode() const noexcept { return mode_; }
  double train_tau() const noexcept { return train_tau_; }
  const InputBox& box() const noexcept { return box_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<std::size_t> layer_sizes() const;

  /// Regression targets are link(score), standardized by (offset, scale).
  void set_target_scaling(double offset, double scale);
  void set_link(TargetLink link, double link_scale);
  double target_offset() const noexcept { return target_offset_; }
  double target_scale() const noexcept { return target_scale_; }
  TargetLink link() const noexcept { return link_; }
  double link_scale() const noexcept { return link_scale_; }
  double apply_link(double score) const;
  double invert_link(double value) const;

  std::size_t parameter_count() const;
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;

  nlohmann::json to_json() const;
  static GapModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static GapModel load(const std::filesystem::path& path);

 private:
  void check_shapes() const;

  std::vector<DenseLayer> layers_;
  InputBox box_;
  ModelMode mode_ = ModelMode::RegressScore;
  double train_tau_ = 0.0;
  double target_offset_ = 0.0;
  double target_scale_ = 1.0;
  TargetLink link_ = TargetLink::Identity;
  double link_scale_ = 1.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingExample {
  LogNormalParams x;
  double score = 0.0;
};

struct TrainHyperparams {
  std::vector<std::size_t> layer_sizes{2, 16, 16, 1};
  double learning_rate = 0.05;
  std::size_t max_epochs = 20000;
  double holdout_fraction = 0.2;
  ModelMode mode = ModelMode::RegressScore;
  TargetLink link = TargetLink::Asinh;
  double link_scale = 0.1;
  double tau = 0.10;  // classification label threshold, and the accuracy threshold in both modes
  std::uint64_t seed = 7;
  std::size_t plateau_window = 500;
  double plateau_tolerance = 1e-5;  // relative loss improvement per plateau window
  std::size_t gradient_check_coords = 10;
  double gradient_check_tolerance = 1e-4;
  /// Empty: derived from the training inputs.
  std::optional<InputBox> box;
};

struct TrainReport {
  double final_loss = 0.0;
  double holdout_accuracy = 0.0;
  double holdout_rmse = 0.0;  // regression mode only, in score units
  std::size_t epochs = 0;
  double gradient_check_error = 0.0;
  std::size_t train_count = 0;
  std::size_t holdout_count = 0;
};

struct TrainResult {
  GapModel model;
  TrainReport report;
};

/// Mean training objective (MSE on standardized link targets, or binary
/// cross-entropy) and, when `grad` is non-null, its gradient laid out like
/// GapModel::parameter().
double training_objective(const GapModel& model, std::span<const TrainingExample> data, double tau,
                          std::vector<double>* grad);

/// Largest relative error between back-propagated and central-difference
/// gradients over `coords` randomly chosen parameters.
double gradient_check(const GapModel& model, std::span<const TrainingExample> data, double tau,
                      std::size_t coords, std::uint64_t seed);

/// Deterministic train/held-out split used by train().
void split_holdout(std::size_t n, double holdout_fraction, std::uint64_t seed, std::vector<std::size_t>& train_idx,
                   std::vector<std::size_t>& holdout_idx);

/// Full-batch gradient descent. Throws TrainingError when the gradient
/// check fails or the objective becomes non-finite.
TrainResult train(std::span<const TrainingExample> data, const TrainHyperparams& hp);

}  // namespace matchsim
