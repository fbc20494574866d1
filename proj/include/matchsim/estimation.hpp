#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "matchsim/market.hpp"

namespace matchsim {

/// Fewer than two samples; callers keep their incumbent decision.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-positive (or non-finite) sojourn sample.
class InvalidSample : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SampleBatch {
  std::vector<double> values;
  std::size_t window_index = 0;
};

/// Maximum-likelihood log-normal fit: mu = mean(ln x), sigma = population
/// standard deviation of ln x. sigma is exactly 0 iff all samples are equal.
LogNormalParams fit_lognormal(std::span<const double> values);
inline LogNormalParams fit_lognormal(const SampleBatch& batch) { return fit_lognormal(batch.values); }

/// Lower bound applied to sigma before it reaches the gap model.
inline constexpr double kMinModelSigma = 1e-4;

}  // namespace matchsim
