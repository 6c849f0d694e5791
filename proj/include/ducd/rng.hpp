#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ducd {

// Deterministic RNG. mt19937_64 has a bit-exact standardized engine; the
// standard *distributions* are implementation-defined, so the mappings to
// doubles live here and are pinned: identical seeds give identical streams
// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Integer in [0, n), n >= 1. Modulo bias is irrelevant at the n used here
  // (object counts, image sizes) and keeps the mapping trivially portable.
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  // Standard normal via Box-Muller on the pinned uniform mapping.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Avoid log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ducd
