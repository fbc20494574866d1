#include "matchsim/gap_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace matchsim {

std::string to_string(ModelMode mode) {
  return mode == ModelMode::RegressScore ? "regress" : "classify";
}

ModelMode parse_model_mode(const std::string& text) {
  if (text == "regress") return ModelMode::RegressScore;
  if (text == "classify") return ModelMode::ClassifyAtTau;
  throw ConfigError("unknown model mode '" + text + "'");
}

std::string to_string(TargetLink link) { return link == TargetLink::Identity ? "identity" : "asinh"; }

TargetLink parse_target_link(const std::string& text) {
  if (text == "identity") return TargetLink::Identity;
  if (text == "asinh") return TargetLink::Asinh;
  throw ConfigError("unknown target link '" + text + "'");
}

LogNormalParams InputBox::clamp(const LogNormalParams& x) const {
  return {std::clamp(x.mu, mu_min, mu_max), std::clamp(x.sigma, sigma_min, sigma_max)};
}

GapModel::GapModel(std::vector<std::size_t> layer_sizes, InputBox box, ModelMode mode, double train_tau,
                   std::uint64_t init_seed)
    : box_(box), mode_(mode), train_tau_(train_tau) {
  if (layer_sizes.size() < 2 || layer_sizes.front() != 2 || layer_sizes.back() != 1) {
    throw ConfigError("layer sizes must start with 2 inputs and end with 1 output");
  }
  std::mt19937_64 rng(init_seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    DenseLayer layer;
    layer.inputs = layer_sizes[l];
    layer.outputs = layer_sizes[l + 1];
    if (layer.inputs == 0 || layer.outputs == 0) throw ConfigError("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    std::uniform_real_distribution<double> init(-limit, limit);
    layer.weights.resize(layer.inputs * layer.outputs);
    for (double& w : layer.weights) w = init(rng);
    layer.bias.assign(layer.outputs, 0.0);
    layers_.push_back(std::move(layer));
  }
  check_shapes();
}

void GapModel::check_shapes() const {
  if (layers_.empty()) throw ConfigError("model has no layers");
  if (box_.degenerate()) throw ConfigError("model normalization box is degenerate");
  if (layers_.front().inputs != 2 || layers_.back().outputs != 1) throw ConfigError("model must map 2 inputs to 1 output");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
      throw ConfigError("layer " + std::to_string(l) + " has inconsistent weight shapes");
    }
    if (l > 0 && layers_[l - 1].outputs != layer.inputs) {
      throw ConfigError("layer " + std::to_string(l) + " does not chain with its predecessor");
    }
  }
  if (!(target_scale_ > 0.0) || !std::isfinite(target_offset_)) throw ConfigError("invalid target scaling");
  if (!(link_scale_ > 0.0) || !std::isfinite(link_scale_)) throw ConfigError("invalid link scale");
}

std::vector<std::size_t> GapModel::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().inputs);
  for (const auto& layer : layers_) sizes.push_back(layer.outputs);
  return sizes;
}

std::array<double, 2> GapModel::normalize(const LogNormalParams& params) const {
  const LogNormalParams x = box_.clamp(params);
  return {2.0 * (x.mu - box_.mu_min) / (box_.mu_max - box_.mu_min) - 1.0,
          2.0 * (x.sigma - box_.sigma_min) / (box_.sigma_max - box_.sigma_min) - 1.0};
}

double GapModel::forward_normalized(double x0, double x1) const {
  std::vector<double> act{x0, x1};
  std::vector<double> next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    next.assign(layer.outputs, 0.0);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double z = layer.bias[o];
      const double* row = &layer.weights[o * layer.inputs];
      for (std::size_t i = 0; i < layer.inputs; ++i) z += row[i] * act[i];
      next[o] = (l + 1 < layers_.size()) ? std::tanh(z) : z;
    }
    act.swap(next);
  }
  return act.front();
}

double GapModel::score(const LogNormalParams& params) const {
  const auto x = normalize(params);
  const double raw = forward_normalized(x[0], x[1]);
  if (mode_ == ModelMode::ClassifyAtTau) return 1.0 / (1.0 + std::exp(-raw));
  return invert_link(raw * target_scale_ + target_offset_);
}

double GapModel::apply_link(double score) const {
  return link_ == TargetLink::Asinh ? std::asinh(score / link_scale_) : score;
}

double GapModel::invert_link(double value) const {
  return link_ == TargetLink::Asinh ? link_scale_ * std::sinh(value) : value;
}

void GapModel::set_link(TargetLink link, double link_scale) {
  link_ = link;
  link_scale_ = link_scale;
  check_shapes();
}

bool GapModel::prefers_patient(const LogNormalParams& params, double tau) const {
  if (mode_ == ModelMode::ClassifyAtTau) return score(params) >= 0.5;
  return score(params) >= tau;
}

void GapModel::set_target_scaling(double offset, double scale) {
  target_offset_ = offset;
  target_scale_ = scale;
  check_shapes();
}

std::size_t GapModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

double& GapModel::parameter(std::size_t index) {
  for (auto& layer : layers_) {
    if (index < layer.weights.size()) return layer.weights[index];
    index -= layer.weights.size();
    if (index < layer.bias.size()) return layer.bias[index];
    index -= layer.bias.size();
  }
  throw std::out_of_range("parameter index out of range");
}

double GapModel::parameter(std::size_t index) const { return const_cast<GapModel*>(this)->parameter(index); }

nlohmann::json GapModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["mode"] = to_string(mode_);
  j["train_tau"] = train_tau_;
  j["layer_sizes"] = layer_sizes();
  j["activation"] = {{"hidden", "tanh"}, {"output", mode_ == ModelMode::RegressScore ? "identity" : "logistic"}};
  j["normalization"] = {{"mu_min", box_.mu_min}, {"mu_max", box_.mu_max},
                        {"sigma_min", box_.sigma_min}, {"sigma_max", box_.sigma_max}};
  j["target_scaling"] = {{"offset", target_offset_}, {"scale", target_scale_}};
  j["target_link"] = {{"kind", to_string(link_)}, {"scale", link_scale_}};
  auto layers = nlohmann::json::array();
  for (const auto& layer : layers_) layers.push_back({{"weights", layer.weights}, {"bias", layer.bias}});
  j["layers"] = std::move(layers);
  return j;
}

GapModel GapModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw ConfigError("unsupported model format version " + j.at("format_version").dump());
    }
    GapModel m;
    m.mode_ = parse_model_mode(j.at("mode").get<std::string>());
    m.train_tau_ = j.at("train_tau").get<double>();
    const auto& n = j.at("normalization");
    m.box_ = {n.at("mu_min").get<double>(), n.at("mu_max").get<double>(), n.at("sigma_min").get<double>(),
              n.at("sigma_max").get<double>()};
    m.target_offset_ = j.at("target_scaling").at("offset").get<double>();
    m.target_scale_ = j.at("target_scaling").at("scale").get<double>();
    m.link_ = parse_target_link(j.at("target_link").at("kind").get<std::string>());
    m.link_scale_ = j.at("target_link").at("scale").get<double>();
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto& layers = j.at("layers");
    if (sizes.size() != layers.size() + 1) throw ConfigError("layer_sizes does not match the layer count");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      DenseLayer layer;
      layer.inputs = sizes[l];
      layer.outputs = sizes[l + 1];
      layer.weights = layers[l].at("weights").get<std::vector<double>>();
      layer.bias = layers[l].at("bias").get<std::vector<double>>();
      m.layers_.push_back(std::move(layer));
    }
    m.check_shapes();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

void GapModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing model file " + path.string());
}

GapModel GapModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Training

namespace {

double target_of(const GapModel& model, const TrainingExample& ex, double tau) {
  if (model.mode() == ModelMode::ClassifyAtTau) return ex.score >= tau ? 1.0 : 0.0;
  return (model.apply_link(ex.score) - model.target_offset()) / model.target_scale();
}

}  // namespace

double training_objective(const GapModel& model, std::span<const TrainingExample> data, double tau,
                          std::vector<double>* grad) {
  if (data.empty()) throw TrainingError("empty training set");
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();
  if (grad) grad->assign(model.parameter_count(), 0.0);

  // Offsets of each layer's weights and biases in the flat parameter layout.
  std::vector<std::size_t> w_off(depth), b_off(depth);
  for (std::size_t l = 0, off = 0; l < depth; ++l) {
    w_off[l] = off;
    off += layers[l].weights.size();
    b_off[l] = off;
    off += layers[l].bias.size();
  }

  std::vector<std::vector<double>> act(depth + 1);
  std::vector<double> delta, prev_delta;
  const bool classify = model.mode() == ModelMode::ClassifyAtTau;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double total = 0.0;

  for (const TrainingExample& ex : data) {
    const auto x = model.normalize(ex.x);
    act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& layer = layers[l];
      act[l + 1].assign(layer.outputs, 0.0);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        double z = layer.bias[o];
        const double* row = &layer.weights[o * layer.inputs];
        for (std::size_t i = 0; i < layer.inputs; ++i) z += row[i] * act[l][i];
        act[l + 1][o] = (l + 1 < depth) ? std::tanh(z) : z;
      }
    }
    const double out = act[depth][0];
    const double y = target_of(model, ex, tau);
    double dout = 0.0;
    if (classify) {
      // log(1 + e^z) - y z, written stably.
      total += std::max(out, 0.0) + std::log1p(std::exp(-std::abs(out))) - y * out;
      dout = 1.0 / (1.0 + std::exp(-out)) - y;
    } else {
      const double r = out - y;
      total += r * r;
      dout = 2.0 * r;
    }
    if (!grad) continue;

    delta.assign(1, dout * inv_n);
    for (std::size_t l = depth; l-- > 0;) {
      const auto& layer = layers[l];
      auto& g = *grad;
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        g[b_off[l] + o] += delta[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) g[w_off[l] + o * layer.inputs + i] += delta[o] * act[l][i];
      }
      if (l == 0) break;
      prev_delta.assign(layer.inputs, 0.0);
      for (std::size_t i = 0; i < layer.inputs; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < layer.outputs; ++o) s += layer.weights[o * layer.inputs + i] * delta[o];
        const double a = act[l][i];
        prev_delta[i] = s * (1.0 - a * a);
      }
      delta.swap(prev_delta);
    }
  }
  return total * inv_n;
}

double gradient_check(const GapModel& model, std::span<const TrainingExample> data, double tau, std::size_t coords,
                      std::uint64_t seed) {
  std::vector<double> analytic;
  training_objective(model, data, tau, &analytic);
  GapModel probe = model;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, model.parameter_count() - 1);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (std::size_t c = 0; c < coords; ++c) {
    const std::size_t idx = pick(rng);
    const double saved = probe.parameter(idx);
    probe.parameter(idx) = saved + h;
    const double up = training_objective(probe, data, tau, nullptr);
    probe.parameter(idx) = saved - h;
    const double down = training_objective(probe, data, tau, nullptr);
    probe.parameter(idx) = saved;
    const double numeric = (up - down) / (2.0 * h);
    // Denominator floor keeps vanishing gradients from reporting noise as error.
    const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic[idx] - numeric) / denom);
  }
  return worst;
}

void split_holdout(std::size_t n, double holdout_fraction, std::uint64_t seed, std::vector<std::size_t>& train_idx,
                   std::vector<std::size_t>& holdout_idx) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, "holdout"));
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  auto holdout = static_cast<std::size_t>(std::round(holdout_fraction * static_cast<double>(n)));
  if (n >= 2) holdout = std::min(holdout, n - 1);
  else holdout = 0;
  holdout_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
  std::sort(holdout_idx.begin(), holdout_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
}

TrainResult train(std::span<const TrainingExample> data, const TrainHyperparams& hp) {
  if (data.empty()) throw TrainingError("training dataset is empty");
  if (!(hp.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");

  std::vector<std::size_t> train_idx, holdout_idx;
  split_holdout(data.size(), hp.holdout_fraction, hp.seed, train_idx, holdout_idx);
  std::vector<TrainingExample> train_set, holdout_set;
  for (auto i : train_idx) train_set.push_back(data[i]);
  for (auto i : holdout_idx) holdout_set.push_back(data[i]);

  InputBox box;
  if (hp.box) {
    box = *hp.box;
  } else {
    box = {data[0].x.mu, data[0].x.mu, data[0].x.sigma, data[0].x.sigma};
    for (const auto& ex : data) {
      box.mu_min = std::min(box.mu_min, ex.x.mu);
      box.mu_max = std::max(box.mu_max, ex.x.mu);
      box.sigma_min = std::min(box.sigma_min, ex.x.sigma);
      box.sigma_max = std::max(box.sigma_max, ex.x.sigma);
    }
    // A single grid line still needs a usable box.
    if (!(box.mu_max > box.mu_min)) { box.mu_min -= 0.5; box.mu_max += 0.5; }
    if (!(box.sigma_max > box.sigma_min)) { box.sigma_min = std::max(0.0, box.sigma_min - 0.5); box.sigma_max += 0.5; }
  }

  GapModel model(hp.layer_sizes, box, hp.mode, hp.tau, derive_seed(hp.seed, "init"));
  if (hp.mode == ModelMode::RegressScore) {
    model.set_link(hp.link, hp.link_scale);
    double mean = 0.0;
    for (const auto& ex : train_set) mean += model.apply_link(ex.score);
    mean /= static_cast<double>(train_set.size());
    double var = 0.0;
    for (const auto& ex : train_set) {
      const double y = model.apply_link(ex.score);
      var += (y - mean) * (y - mean);
    }
    var /= static_cast<double>(train_set.size());
    model.set_target_scaling(mean, var > 1e-12 ? std::sqrt(var) : 1.0);
  }

  TrainReport report;
  report.train_count = train_set.size();
  report.holdout_count = holdout_set.size();
  report.gradient_check_error =
      gradient_check(model, train_set, hp.tau, hp.gradient_check_coords, derive_seed(hp.seed, "gradcheck"));
  if (!(report.gradient_check_error < hp.gradient_check_tolerance)) {
    std::ostringstream msg;
    msg << "gradient check failed: max relative error " << report.gradient_check_error << " >= "
        << hp.gradient_check_tolerance;
    throw TrainingError(msg.str());
  }

  std::vector<double> grad;
  double loss = training_objective(model, train_set, hp.tau, &grad);
  double checkpoint = loss;
  std::size_t epoch = 0;
  const std::size_t n_params = model.parameter_count();
  while (epoch < hp.max_epochs) {
    for (std::size_t k = 0; k < n_params; ++k) model.parameter(k) -= hp.learning_rate * grad[k];
    loss = training_objective(model, train_set, hp.tau, &grad);
    ++epoch;
    if (!std::isfinite(loss)) {
      throw TrainingError("training objective became non-finite at epoch " + std::to_string(epoch));
    }
    if (hp.plateau_window > 0 && epoch % hp.plateau_window == 0) {
      if (checkpoint - loss < hp.plateau_tolerance * std::max(checkpoint, 1e-12)) break;
      checkpoint = loss;
    }
  }
  report.final_loss = loss;
  report.epochs = epoch;

  const auto& eval = holdout_set.empty() ? train_set : holdout_set;
  std::size_t correct = 0;
  double se = 0.0;
  for (const auto& ex : eval) {
    const bool truth = ex.score >= hp.tau;
    if (model.prefers_patient(ex.x, hp.tau) == truth) ++correct;
    if (hp.mode == ModelMode::RegressScore) {
      const double r = model.score(ex.x) - ex.score;
      se += r * r;
    }
  }
  report.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(eval.size());
  report.holdout_rmse = hp.mode == ModelMode::RegressScore ? std::sqrt(se / static_cast<double>(eval.size())) : 0.0;
  return {std::move(model), report};
}

}  // namespace matchsim
