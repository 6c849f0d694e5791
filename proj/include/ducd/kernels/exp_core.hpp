#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ducd::kernels {

// exp() shared by the scalar and AVX2 backends. Both follow the identical
// step sequence (round, Cody-Waite reduction with fma, Horner, exponent
// scaling) so per-lane results are bitwise equal to the scalar path.
//
// Range contract: inputs below kExpLo flush to 0 (results there would be
// subnormal), inputs above kExpHi return +inf. Softmax and sigmoid only ever
// pass non-positive arguments.
inline constexpr double kExpLo = -708.0;
inline constexpr double kExpHi = 709.0;
inline constexpr double kLog2E = 1.4426950408889634074;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;

// Taylor coefficients 1/i!, i = 0..13. Degree 13 leaves truncation error
// ~4e-18 relative over |r| <= ln2/2.
inline constexpr double kExpPoly[14] = {
    1.0,
    1.0,
    1.0 / 2,
    1.0 / 6,
    1.0 / 24,
    1.0 / 120,
    1.0 / 720,
    1.0 / 5040,
    1.0 / 40320,
    1.0 / 362880,
    1.0 / 3628800,
    1.0 / 39916800,
    1.0 / 479001600,
    1.0 / 6227020800.0,
};

inline double exp_one(double x) {
  if (x < kExpLo) return 0.0;
  if (x > kExpHi) return std::numeric_limits<double>::infinity();
  const double kd = std::nearbyint(x * kLog2E);
  double r = std::fma(-kd, kLn2Hi, x);
  r = std::fma(-kd, kLn2Lo, r);
  double p = kExpPoly[13];
  for (int i = 12; i >= 0; --i) p = std::fma(p, r, kExpPoly[i]);
  const auto k = static_cast<std::int64_t>(kd);
  const double pow2k =
      std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
  return p * pow2k;
}

// Numerically stable logistic built on exp_one; argument of exp is always
// non-positive.
inline double sigmoid_one(double x) {
  const double t = exp_one(-std::fabs(x));
  return x >= 0.0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
}

}  // namespace ducd::kernels
