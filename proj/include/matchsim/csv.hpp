#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace matchsim::csv {

/// Shortest round-trippable form is not needed; 17 significant digits always
/// round-trip and keep output byte-stable.
inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string num(std::size_t x) { return std::to_string(x); }

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string fingerprint_line(const std::string& fingerprint) {
  return "# config-fingerprint: " + fingerprint;
}

}  // namespace matchsim::csv
