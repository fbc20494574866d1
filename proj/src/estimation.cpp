#include "matchsim/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace matchsim {

LogNormalParams fit_lognormal(std::span<const double> values) {
  if (values.size() < 2) {
    throw InsufficientData("log-normal fit needs at least 2 samples, got " + std::to_string(values.size()));
  }
  std::vector<double> logs;
  logs.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSample("sojourn samples must be finite and > 0");
    logs.push_back(std::log(v));
  }

  // Summing in sorted order makes the estimate independent of sample order.
  std::sort(logs.begin(), logs.end());
  if (logs.front() == logs.back()) return {logs.front(), 0.0};

  const auto n = static_cast<double>(logs.size());
  double sum = 0.0;
  for (double l : logs) sum += l;
  const double mean = sum / n;
  double ss = 0.0;
  for (double l : logs) ss += (l - mean) * (l - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace matchsim
