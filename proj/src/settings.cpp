#include "matchsim/settings.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "matchsim/market.hpp"
#include "matchsim/rng.hpp"

namespace matchsim {

const std::vector<std::pair<std::string, std::string>>& Settings::known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys{
      {"market.lambda", "arrival rate"},
      {"market.d", "density d = p * lambda; p is derived from it unless market.p is set"},
      {"market.p", "pairwise compatibility probability (overrides market.d)"},
      {"market.T", "horizon end"},
      {"market.T0", "end of the mixing period"},
      {"market.mu", "log-normal departure location"},
      {"market.sigma", "log-normal departure scale"},
      {"hybrid.tau", "loss tolerance threshold"},
      {"hybrid.w", "decision window size"},
      {"hybrid.min_samples", "minimum batch size for re-estimation"},
      {"hybrid.source", "estimation samples: reported | observed"},
      {"hybrid.initial", "policy of the first window: patient | greedy"},
      {"experiment.policies", "comma list of greedy, patient, hybrid, hybrid@<tau>"},
      {"experiment.k", "independent runs per point"},
      {"experiment.seed", "master seed"},
      {"experiment.workers", "worker threads (0 = hardware concurrency)"},
      {"sweep.axis", "none | d | tau | w | mu | sigma"},
      {"sweep.values", "comma list of sweep values"},
      {"usage.from", "start of the policy-usage interval (default T0)"},
      {"usage.to", "end of the policy-usage interval (default T)"},
      {"output.path", "output file or directory"},
      {"model.path", "trained gap model file"},
      {"grid.mu_min", "labeling grid"},
      {"grid.mu_max", "labeling grid"},
      {"grid.mu_step", "labeling grid"},
      {"grid.sigma_min", "labeling grid"},
      {"grid.sigma_max", "labeling grid"},
      {"grid.sigma_step", "labeling grid"},
      {"oracle.d", "density used for labeling"},
      {"oracle.k", "paired runs averaged per grid point"},
      {"train.mode", "regress | classify"},
      {"train.tau", "classification threshold and accuracy threshold"},
      {"train.layers", "comma list of layer sizes"},
      {"train.lr", "learning rate"},
      {"train.epochs", "maximum epochs"},
      {"train.holdout", "held-out fraction"},
      {"train.seed", "weight initialization and split seed"},
      {"train.link", "regression output link: asinh | identity"},
      {"train.link_scale", "asinh link scale"},
      {"heatmap.taus", "comma list of contour thresholds"},
      {"schedule.from", "schedule report interval start"},
      {"schedule.to", "schedule report interval end"},
      {"reproduce.d_values", "densities swept by the reproduction run"},
      {"reproduce.w_values", "window sizes swept by the reproduction run"},
      {"reproduce.taus", "thresholds compared by the reproduction run"},
  };
  return keys;
}

Settings Settings::profile(const std::string& name) {
  Settings s;
  const bool paper = name == "paper";
  if (!paper && name != "desk") throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
  s.set("market.lambda", "100");
  s.set("market.d", "8");
  s.set("market.T", paper ? "100" : "50");
  s.set("market.T0", paper ? "50" : "25");
  s.set("market.mu", "-1.5");
  s.set("market.sigma", "0.5");
  s.set("hybrid.tau", "0.1");
  s.set("hybrid.w", "0.3");
  s.set("hybrid.min_samples", "2");
  s.set("hybrid.source", "reported");
  s.set("hybrid.initial", "patient");
  s.set("experiment.policies", "greedy,patient,hybrid");
  s.set("experiment.k", "10");
  s.set("experiment.seed", "20240601");
  s.set("experiment.workers", "0");
  s.set("sweep.axis", "none");
  s.set("sweep.values", "");
  s.set("grid.mu_min", "-2");
  s.set("grid.mu_max", "2");
  s.set("grid.mu_step", "0.2");
  s.set("grid.sigma_min", "0.05");
  s.set("grid.sigma_max", "2");
  s.set("grid.sigma_step", "0.05");
  s.set("oracle.d", "8");
  s.set("oracle.k", "10");
  s.set("train.mode", "regress");
  s.set("train.tau", "0.1");
  s.set("train.layers", "2,16,16,1");
  s.set("train.lr", "0.05");
  s.set("train.epochs", "20000");
  s.set("train.holdout", "0.2");
  s.set("train.seed", "7");
  s.set("train.link", "asinh");
  s.set("train.link_scale", "0.1");
  s.set("heatmap.taus", "0.01,0.1,0.15");
  s.set("reproduce.d_values", "2,4,6,8,10");
  s.set("reproduce.w_values", "0.1,0.3,1,5");
  s.set("reproduce.taus", "0.01,0.1,0.15");
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Settings Settings::parse(const std::string& text, const std::string& origin) {
  Settings s;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    s.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return s;
}

Settings Settings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.string());
}

void Settings::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::none_of(keys.begin(), keys.end(), [&](const auto& k) { return k.first == key; })) {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
  values_[key] = value;
}

void Settings::merge(const Settings& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> Settings::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Settings::get_string(const std::string& key) const {
  const auto v = find(key);
  if (!v) throw ConfigError("missing configuration key '" + key + "'");
  return *v;
}

double Settings::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t Settings::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

std::size_t Settings::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

std::vector<std::string> Settings::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get_string(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> Settings::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_strings(key)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects a list of numbers, got '" + item + "'");
    }
  }
  return out;
}

std::string Settings::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string Settings::fingerprint() const {
  // Keys that cannot change results stay out of the digest.
  std::string text;
  for (const auto& [k, v] : values_) {
    if (k == "experiment.workers" || k == "output.path") continue;
    text += k + "=" + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(label_hash(text)));
  return buf;
}

}  // namespace matchsim
