#pragma once

// ExpMul(x, V) = e^x * V, realized as subtracting L = log2exp(x) from the
// biased exponent of every element of V. No rounding happens: nonzero
// outputs are exactly v * 2^-L. Elements whose exponent would drop to zero
// or below are flushed to zero.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "flashexp/fixedlog.hpp"
#include "flashexp/floatbits.hpp"

namespace flashexp {

/// Finite vector tagged with its element format.
struct VectorF {
  Dtype dtype = Dtype::FP32;
  std::vector<float> elements;
};

/// Counters from one ExpMul call.
struct ExpMulStats {
  std::size_t flushed = 0;  // nonzero inputs that underflowed to zero
  bool clipped = false;     // finite x fell below the clip floor
};

/// Scales `v` by 2^-lhat into `out` (sizes must match, aliasing allowed).
inline std::size_t exp2_decrement(LHat lhat, std::span<const float> v, Dtype dtype,
                                  std::span<float> out) {
  if (v.size() != out.size()) {
    throw std::invalid_argument("expmul: output size mismatch");
  }
  const auto decrement = static_cast<std::uint32_t>(lhat.value);
  std::size_t flushed = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const FloatParts parts = extract(v[i], dtype);
    if (parts.biased_exponent == 0) {
      out[i] = 0.0f;
      continue;
    }
    if (parts.biased_exponent <= decrement) {
      out[i] = 0.0f;
      ++flushed;
      continue;
    }
    out[i] = compose({parts.sign, parts.biased_exponent - decrement, parts.mantissa, dtype});
  }
  return flushed;
}

/// In-place-capable span form. L is computed once per call.
inline ExpMulStats expmul(float x, std::span<const float> v, Dtype dtype, std::span<float> out) {
  const LHat lhat = log2exp(x);
  return {exp2_decrement(lhat, v, dtype, out), std::isfinite(x) && x < kClipLow};
}

[[nodiscard]] inline VectorF expmul(float x, const VectorF& v) {
  VectorF out{v.dtype, std::vector<float>(v.elements.size())};
  expmul(x, v.elements, v.dtype, out.elements);
  return out;
}

}  // namespace flashexp
