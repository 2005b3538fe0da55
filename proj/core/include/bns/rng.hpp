#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "bns/fnv.hpp"

namespace bns {

// Deterministic random source. mt19937_64 output is fixed by the standard,
// and the distributions are implemented here because std::normal_distribution
// et al. are free to differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller; the spare deviate is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable per-purpose seed derivation so one manifest seed can drive splits,
// init, shuffles, and dropout without the streams colliding.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t state = kFnv64Offset;
  for (int i = 0; i < 8; ++i) {
    state ^= (base >> (8 * i)) & 0xffu;
    state *= kFnv64Prime;
  }
  return fnv1a64(tag, state);
}

}  // namespace bns
