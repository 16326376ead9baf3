#pragma once

// Clip -> Q6.10 fixed point -> shift-add pipeline producing the integer
// exponent decrement that replaces e^x for x <= 0.
//
//   L = -round( xq + (xq >> 1) - (xq >> 4) ),   xq = Fixed(Clip(x, -15, 0))
//
// 1 + 1/2 - 1/16 = 1.4375 stands in for log2(e) ~= 1.4427. Both roundings
// (into Q6.10 and to the final integer) resolve ties to even.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace flashexp {

inline constexpr float kClipLow = -15.0f;
inline constexpr float kClipHigh = 0.0f;

/// 16-bit two's-complement, 6 integer bits (sign included), 10 fraction bits.
struct FixedQ {
  static constexpr int kFractionBits = 10;
  static constexpr double kScale = 1024.0;

  std::int16_t raw = 0;

  [[nodiscard]] constexpr double to_double() const noexcept { return raw / kScale; }

  friend constexpr bool operator==(FixedQ, FixedQ) = default;
};

/// Non-negative exponent decrement, always within [0, 22].
struct LHat {
  static constexpr int kMax = 22;

  int value = 0;

  friend constexpr bool operator==(LHat, LHat) = default;
};

namespace detail {

/// Nearest integer, ties to even. Independent of the FP environment.
[[nodiscard]] inline double round_half_even(double y) noexcept {
  const double lo = std::floor(y);
  const double diff = y - lo;
  if (diff > 0.5) return lo + 1.0;
  if (diff < 0.5) return lo;
  return std::fmod(lo, 2.0) == 0.0 ? lo : lo + 1.0;
}

/// round(t / 2^10) to an integer, ties to even, on the raw integer.
[[nodiscard]] constexpr std::int32_t round_q10_to_int(std::int32_t t) noexcept {
  const std::int32_t q = t >> FixedQ::kFractionBits;
  const std::int32_t rem = t - q * (1 << FixedQ::kFractionBits);
  constexpr std::int32_t half = 1 << (FixedQ::kFractionBits - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

}  // namespace detail

/// min(max(x, -15), 0). -inf (the running-max sentinel) maps to -15.
[[nodiscard]] inline float clip(float x) {
  if (std::isnan(x)) {
    throw std::domain_error("clip: NaN input");
  }
  return x < kClipLow ? kClipLow : (x > kClipHigh ? kClipHigh : x);
}

[[nodiscard]] inline FixedQ to_fixed(float x) {
  if (!(x >= kClipLow && x <= kClipHigh)) {
    throw std::invalid_argument("to_fixed: input outside [-15, 0]");
  }
  // x * 1024 is exact in double.
  const double scaled = detail::round_half_even(static_cast<double>(x) * FixedQ::kScale);
  return FixedQ{static_cast<std::int16_t>(scaled)};
}

/// Shift-add core on an already-quantized input.
[[nodiscard]] constexpr LHat log2exp_fixed(FixedQ xq) noexcept {
  // 32-bit intermediate; the 16-bit raw would also suffice for [-15, 0].
  const std::int32_t r = xq.raw;
  const std::int32_t t = r + (r >> 1) - (r >> 4);
  return LHat{-detail::round_q10_to_int(t)};
}

/// Integer approximation of -x * log2(e) for x <= 0 (or -inf).
[[nodiscard]] inline LHat log2exp(float x) {
  if (std::isnan(x)) {
    throw std::domain_error("log2exp: NaN input");
  }
  if (x > 0.0f) {
    throw std::invalid_argument("log2exp: positive input");
  }
  return log2exp_fixed(to_fixed(clip(x)));
}

}  // namespace flashexp
