#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cfuse {

/// Seedable generator with a portable output sequence.
///
/// The engine is std::mt19937_64, whose output is fully specified by the
/// C++ standard. The standard distributions are implementation-defined, so
/// every derived variate is computed here:
///   - uniform_index: rejection sampling on the raw 64-bit output
///   - uniform01: top 53 bits scaled by 2^-53
///   - normal: Marsaglia polar method, spare value cached
/// Given the same seed, any conforming toolchain reproduces the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % bound;
    }
  }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cfuse
