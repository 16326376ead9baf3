#pragma once

// Bit-level view of FP32 and BF16 scalars.
//
// Both formats share the FP32 exponent layout (8 bits, bias 127); BF16 keeps
// only the top 7 mantissa bits. BF16 values are carried around as `float`s
// whose low 16 bits are zero, so every kernel can do its step arithmetic in
// FP32 and round back with round_to_dtype().
//
// Subnormals are flushed to zero in both directions: extract() reports them
// with a zero exponent and mantissa, and compose() maps any E == 0 to +0.0.

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flashexp {

enum class Dtype : std::uint8_t { FP32 = 0, BF16 = 1 };

struct DtypeInfo {
  int exponent_bits;
  int mantissa_bits;
  int bias;
  int storage_bytes;
};

[[nodiscard]] constexpr DtypeInfo info(Dtype dtype) noexcept {
  switch (dtype) {
    case Dtype::BF16:
      return {8, 7, 127, 2};
    case Dtype::FP32:
    default:
      return {8, 23, 127, 4};
  }
}

static_assert(info(Dtype::FP32).bias == (1 << (info(Dtype::FP32).exponent_bits - 1)) - 1);
static_assert(info(Dtype::BF16).bias == (1 << (info(Dtype::BF16).exponent_bits - 1)) - 1);

[[nodiscard]] constexpr std::string_view to_string(Dtype dtype) noexcept {
  return dtype == Dtype::BF16 ? "bf16" : "fp32";
}

[[nodiscard]] inline Dtype parse_dtype(std::string_view name) {
  if (name == "fp32" || name == "FP32") return Dtype::FP32;
  if (name == "bf16" || name == "BF16") return Dtype::BF16;
  throw std::invalid_argument("unknown dtype '" + std::string(name) + "'");
}

/// Sign / biased exponent / mantissa fields of a scalar in a given format.
struct FloatParts {
  std::uint32_t sign = 0;
  std::uint32_t biased_exponent = 0;
  std::uint32_t mantissa = 0;
  Dtype dtype = Dtype::FP32;

  friend constexpr bool operator==(const FloatParts&, const FloatParts&) = default;
};

/// Raw BF16 bit pattern.
class bfloat16 {
 public:
  constexpr bfloat16() noexcept = default;

  [[nodiscard]] static constexpr bfloat16 from_bits(std::uint16_t bits) noexcept {
    bfloat16 b;
    b.bits_ = bits;
    return b;
  }

  [[nodiscard]] constexpr std::uint16_t bits() const noexcept { return bits_; }

  [[nodiscard]] constexpr float to_float() const noexcept {
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits_) << 16);
  }

  friend constexpr bool operator==(bfloat16, bfloat16) = default;

 private:
  std::uint16_t bits_ = 0;
};

/// Round-to-nearest-even on the low 16 bits of an FP32 value. NaN stays a
/// (quiet) NaN; finite values past the BF16 range round to infinity.
[[nodiscard]] constexpr bfloat16 round_fp32_to_bf16(float value) noexcept {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  if ((bits & 0x7F800000u) == 0x7F800000u && (bits & 0x007FFFFFu) != 0) {
    return bfloat16::from_bits(static_cast<std::uint16_t>((bits >> 16) | 0x0040u));
  }
  const std::uint32_t lsb = (bits >> 16) & 1u;
  const std::uint32_t rounded = bits + 0x7FFFu + lsb;
  return bfloat16::from_bits(static_cast<std::uint16_t>(rounded >> 16));
}

/// Rounds an FP32 step result to the storage precision of `dtype`.
[[nodiscard]] constexpr float round_to_dtype(float value, Dtype dtype) noexcept {
  return dtype == Dtype::BF16 ? round_fp32_to_bf16(value).to_float() : value;
}

[[nodiscard]] constexpr bool representable(float value, Dtype dtype) noexcept {
  return dtype == Dtype::FP32 || (std::bit_cast<std::uint32_t>(value) & 0xFFFFu) == 0;
}

/// Decomposes `value` into its fields in `dtype`.
///
/// Throws std::domain_error for NaN/infinity and std::invalid_argument when
/// a BF16 request carries FP32-only mantissa bits.
[[nodiscard]] inline FloatParts extract(float value, Dtype dtype) {
  if (!std::isfinite(value)) {
    throw std::domain_error("extract: non-finite value");
  }
  if (!representable(value, dtype)) {
    throw std::invalid_argument("extract: value is not representable in bf16");
  }
  const auto bits = std::bit_cast<std::uint32_t>(value);
  const int shift = 23 - info(dtype).mantissa_bits;

  FloatParts parts;
  parts.dtype = dtype;
  parts.sign = bits >> 31;
  parts.biased_exponent = (bits >> 23) & 0xFFu;
  parts.mantissa = parts.biased_exponent == 0 ? 0u : (bits & 0x007FFFFFu) >> shift;
  return parts;
}

/// Reassembles a scalar from its fields. Any E == 0 yields +0.0.
[[nodiscard]] inline float compose(const FloatParts& parts) {
  const DtypeInfo di = info(parts.dtype);
  if (parts.sign > 1u || parts.biased_exponent >= (1u << di.exponent_bits) ||
      parts.mantissa >= (1u << di.mantissa_bits)) {
    throw std::invalid_argument("compose: field out of range");
  }
  if (parts.biased_exponent == 0) {
    return 0.0f;
  }
  const std::uint32_t bits = (parts.sign << 31) | (parts.biased_exponent << 23) |
                             (parts.mantissa << (23 - di.mantissa_bits));
  return std::bit_cast<float>(bits);
}

}  // namespace flashexp
