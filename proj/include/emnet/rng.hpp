#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace emn {

/// Seedable 64-bit generator with platform-independent derived draws.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the
/// standard); the derived draws below are computed here rather than with
/// <random> distributions, whose algorithms are implementation-defined.
/// Every simulation draw goes through one of these four functions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0, by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform heading in [0, 360) degrees.
  double heading() { return uniform01() * 360.0; }

  /// Fair coin from the top bit.
  bool coin() { return (next() >> 63) != 0; }

  std::string serialize() const;
  void deserialize(const std::string& s);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace emn
