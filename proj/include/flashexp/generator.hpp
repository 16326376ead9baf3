#pragma once

// Seeded Q/K/V instances.
//
// One std::mt19937_64 stream per instance fills Q, then K, then V in
// row-major order. Each draw takes the top 24 bits of a 64-bit output,
// u = (x >> 40) * 2^-24, and maps it to 2u - 1, exactly representable in
// FP32 and uniform on [-1, 1).
//
// Nominal: Q and K are scaled by 0.99 * sqrt(30 / d) so |q . k| <= 30; V is
// the raw draw. Stress: the score bound becomes 400, forcing s - m far below
// the -15 clip floor, and every V element is further scaled by 2^-j with j
// drawn uniformly from [0, 100] so ExpMul reaches its flush-to-zero path.
// BF16 instances round every element to nearest-even.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

#include "flashexp/floatbits.hpp"
#include "flashexp/tensor.hpp"

namespace flashexp {

struct GenConfig {
  std::size_t d = 16;
  std::size_t seqlen = 64;
  std::size_t queries = 8;
  std::uint64_t seed = 1;
  Dtype dtype = Dtype::FP32;
  bool stress = false;
};

struct Instance {
  Tensor q;
  Tensor k;
  Tensor v;
};

inline constexpr double kNominalScoreBound = 30.0;
inline constexpr double kStressScoreBound = 400.0;
inline constexpr int kStressMaxValueShift = 100;

namespace detail {

[[nodiscard]] inline float uniform_pm1(std::mt19937_64& rng) {
  const auto top = static_cast<float>(rng() >> 40);
  return 2.0f * std::ldexp(top, -24) - 1.0f;
}

inline void fill(Tensor& t, std::mt19937_64& rng, float amplitude) {
  for (float& x : t.data()) x = round_to_dtype(amplitude * uniform_pm1(rng), t.dtype());
}

}  // namespace detail

[[nodiscard]] inline Instance generate(const GenConfig& cfg) {
  if (cfg.d == 0 || cfg.seqlen == 0 || cfg.queries == 0) {
    throw std::invalid_argument("generate: d, N and query count must be >= 1");
  }
  std::mt19937_64 rng(cfg.seed);
  const double bound = cfg.stress ? kStressScoreBound : kNominalScoreBound;
  const auto amplitude = static_cast<float>(0.99 * std::sqrt(bound / static_cast<double>(cfg.d)));

  Instance inst{Tensor(cfg.queries, cfg.d, cfg.dtype), Tensor(cfg.seqlen, cfg.d, cfg.dtype),
                Tensor(cfg.seqlen, cfg.d, cfg.dtype)};
  detail::fill(inst.q, rng, amplitude);
  detail::fill(inst.k, rng, amplitude);
  if (!cfg.stress) {
    detail::fill(inst.v, rng, 1.0f);
    return inst;
  }
  for (float& x : inst.v.data()) {
    const float base = detail::uniform_pm1(rng);
    const auto shift = static_cast<int>(rng() % (kStressMaxValueShift + 1));
    x = round_to_dtype(std::ldexp(base, -shift), cfg.dtype);
  }
  return inst;
}

}  // namespace flashexp
