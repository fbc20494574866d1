#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace matchsim {

/// SplitMix64 finalizer. Used both to derive stream seeds and as the
/// counter-based generator behind pairwise compatibility.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// FNV-1a over a label, so stream names map to fixed 64-bit tags.
constexpr std::uint64_t label_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  return mix64(master ^ mix64(label_hash(label)));
}

/// Seed for run `run_index` of sweep point `sweep_index`. Pure in its inputs,
/// so adding sweep points never shifts the seeds of existing ones.
constexpr std::uint64_t derive_run_seed(std::uint64_t master, std::uint64_t sweep_index,
                                        std::uint64_t run_index) noexcept {
  return mix64(mix64(master ^ mix64(sweep_index + 0x51ED2701ULL)) ^ mix64(run_index + 0xA24BAED4ULL));
}

/// Maps a 64-bit word to a double uniform on [0, 1).
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// The four independent random sources of one run.
struct RngStreams {
  explicit RngStreams(std::uint64_t master_seed)
      : arrivals(derive_seed(master_seed, "arrivals")),
        sojourns(derive_seed(master_seed, "sojourns")),
        selection(derive_seed(master_seed, "selection")),
        compatibility_key(derive_seed(master_seed, "compatibility")) {}

  std::mt19937_64 arrivals;
  std::mt19937_64 sojourns;
  std::mt19937_64 selection;
  std::uint64_t compatibility_key;
};

}  // namespace matchsim
