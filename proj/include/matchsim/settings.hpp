#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace matchsim {

/// Flat dotted key/value configuration (`market.lambda = 100`). Later
/// layers override earlier ones: profile defaults, file, environment, flags.
class Settings {
 public:
  /// Every key the harness understands, with a one-line description.
  static const std::vector<std::pair<std::string, std::string>>& known_keys();

  /// Profile defaults: "desk" (T = 50, T0 = 25) or "paper" (T = 100, T0 = 50).
  static Settings profile(const std::string& name);

  /// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
  static Settings parse(const std::string& text, const std::string& origin = "<text>");
  static Settings load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void merge(const Settings& other);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;

  /// Canonical `key=value` lines, sorted by key.
  std::string canonical() const;
  /// 16-hex-digit FNV-1a digest of the result-relevant keys (all but
  /// experiment.workers and output.path).
  std::string fingerprint() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Name of the environment variable that overrides experiment.seed.
inline constexpr const char* kSeedEnvVar = "MATCHSIM_SEED";

}  // namespace matchsim
