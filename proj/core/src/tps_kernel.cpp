// Kept in its own translation unit so the loop below is compiled once per
// instruction set (target_clones) and vectorized by the compiler.
#include <bit>
#include <cstddef>
#include <cstdint>

#include "flowsynth/tps.hpp"

namespace flowsynth::detail {

namespace {

// Natural log for positive, finite, normal x: fdlibm's reduction to
// [sqrt(2)/2, sqrt(2)) and its degree-14 minimax polynomial in s = f / (2 + f).
// Written without branches so the loop vectorizes; within ~1 ulp of std::log.
inline double log_positive(double x) {
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kLg1 = 6.666666666666735130e-01, kLg2 = 3.999999999940941908e-01;
  constexpr double kLg3 = 2.857142874366239149e-01, kLg4 = 2.222219843214978396e-01;
  constexpr double kLg5 = 1.818357216161805012e-01, kLg6 = 1.531383769920937332e-01;
  constexpr double kLg7 = 1.479819860511658591e-01;

  const auto bits = std::bit_cast<std::uint64_t>(x);
  // Shift the mantissa so that m lands in [sqrt(2)/2, sqrt(2)).
  const std::uint64_t hx = (bits >> 32) + (0x3ff00000 - 0x3fe6a09e);
  // Exponent as a double via the 2^52 trick; AVX2 has no int64 -> double.
  const double k = std::bit_cast<double>(0x4330000000000000ULL | (hx >> 20)) -
                   (4503599627370496.0 + 1023.0);
  const std::uint64_t mbits = (((hx & 0x000fffff) + 0x3fe6a09e) << 32) | (bits & 0xffffffff);
  const double f = std::bit_cast<double>(mbits) - 1.0;

  const double s = f / (2.0 + f);
  const double z = s * s;
  const double w = z * z;
  const double t1 = w * (kLg2 + w * (kLg4 + w * kLg6));
  const double t2 = z * (kLg1 + w * (kLg3 + w * (kLg5 + w * kLg7)));
  const double r = t2 + t1;
  const double hfsq = 0.5 * f * f;
  return k * kLn2Hi - ((hfsq - (s * (hfsq + r) + k * kLn2Lo)) - f);
}

}  // namespace

#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
__attribute__((target_clones("avx512f", "avx2", "default")))
#endif
void accumulate_tps_kernel(const double* xs, const double* ys, std::size_t n, double cx,
                           double cy, double wx, double wy, double* acc_x, double* acc_y) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - cx;
    const double dy = ys[i] - cy;
    const double r2 = dx * dx + dy * dy;
    // Tiny r2 is replaced by 1, where the kernel is exactly 0; this keeps
    // zero and subnormals away from log_positive without a branch.
    const double r = r2 > 1e-300 ? r2 : 1.0;
    const double u = r * log_positive(r);
    acc_x[i] += wx * u;
    acc_y[i] += wy * u;
  }
}

}  // namespace flowsynth::detail
