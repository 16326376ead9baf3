#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "flashexp/expmul.hpp"

using namespace flashexp;

namespace {

std::uint32_t bits(float x) { return std::bit_cast<std::uint32_t>(x); }

}  // namespace

TEST(ExpMul, ZeroArgumentIsBitIdentity) {
  const VectorF v{Dtype::FP32, {1.5f, -2.0f}};
  const VectorF out = expmul(0.0f, v);
  ASSERT_EQ(out.elements.size(), 2u);
  EXPECT_EQ(bits(out.elements[0]), bits(1.5f));
  EXPECT_EQ(bits(out.elements[1]), bits(-2.0f));
}

TEST(ExpMul, MinusOneHalves) {
  // L = 1, exponent 129 -> 128
  const VectorF out = expmul(-1.0f, VectorF{Dtype::FP32, {4.0f}});
  EXPECT_EQ(out.elements[0], 2.0f);
}

TEST(ExpMul, UnderflowFlushesToZero) {
  // L = 22, biased exponent 17 - 22 <= 0
  const float tiny = std::ldexp(1.0f, -110);
  ASSERT_EQ((bits(tiny) >> 23) & 0xFF, 17u);
  std::vector<float> out(1);
  const ExpMulStats stats = expmul(-15.0f, std::vector<float>{tiny}, Dtype::FP32, out);
  EXPECT_EQ(bits(out[0]), 0u);
  EXPECT_EQ(stats.flushed, 1u);
  EXPECT_FALSE(stats.clipped);
}

TEST(ExpMul, ExponentExactlyAtDecrementFlushes) {
  const float v = std::ldexp(1.0f, 22 - 127);  // biased exponent 22
  std::vector<float> out(1);
  EXPECT_EQ(expmul(-15.0f, std::vector<float>{v}, Dtype::FP32, out).flushed, 1u);
  const float w = std::ldexp(1.0f, 23 - 127);  // biased exponent 23 -> 1
  EXPECT_EQ(expmul(-15.0f, std::vector<float>{w}, Dtype::FP32, out).flushed, 0u);
  EXPECT_EQ((bits(out[0]) >> 23) & 0xFF, 1u);
}

TEST(ExpMul, ZerosStayZeroWithoutCountingFlushes) {
  std::vector<float> v{0.0f, -0.0f, 0.0f};
  std::vector<float> out(3, 1.0f);
  for (float x : {0.0f, -3.0f, -15.0f, -std::numeric_limits<float>::infinity()}) {
    const ExpMulStats stats = expmul(x, v, Dtype::BF16, out);
    EXPECT_EQ(stats.flushed, 0u);
    for (float o : out) EXPECT_EQ(bits(o), 0u);
  }
}

TEST(ExpMul, ClipFlagOnlyForFiniteArguments) {
  std::vector<float> v{1.0f};
  std::vector<float> out(1);
  EXPECT_TRUE(expmul(-16.0f, v, Dtype::FP32, out).clipped);
  EXPECT_FALSE(expmul(-15.0f, v, Dtype::FP32, out).clipped);
  EXPECT_FALSE(expmul(-std::numeric_limits<float>::infinity(), v, Dtype::FP32, out).clipped);
}

TEST(ExpMul, InPlace) {
  std::vector<float> v{8.0f, -3.0f};
  expmul(-1.0f, v, Dtype::FP32, v);
  EXPECT_EQ(v[0], 4.0f);
  EXPECT_EQ(v[1], -1.5f);
}

TEST(ExpMul, Errors) {
  std::vector<float> out(1);
  EXPECT_THROW(expmul(0.5f, std::vector<float>{1.0f}, Dtype::FP32, out), std::invalid_argument);
  EXPECT_THROW(expmul(-1.0f, std::vector<float>{std::numeric_limits<float>::infinity()}, Dtype::FP32, out),
               std::domain_error);
  std::vector<float> wrong(2);
  EXPECT_THROW(expmul(-1.0f, std::vector<float>{1.0f}, Dtype::FP32, wrong), std::invalid_argument);
}

TEST(ExpMul, ApproximationEnvelopeProperty) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> xdist(-15.0f, 0.0f);
  std::uniform_real_distribution<float> vdist(-100.0f, 100.0f);
  const double lo = std::exp2(-0.59);
  const double hi = std::exp2(0.59);
  for (int i = 0; i < 20000; ++i) {
    const float x = xdist(rng);
    for (Dtype dtype : {Dtype::FP32, Dtype::BF16}) {
      std::vector<float> v(8);
      for (float& e : v) e = round_to_dtype(vdist(rng), dtype);
      std::vector<float> out(v.size());
      expmul(x, v, dtype, out);
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] == 0.0f) continue;
        ASSERT_NE(out[j], 0.0f);
        const double ratio = out[j] / (std::exp(static_cast<double>(x)) * v[j]);
        ASSERT_GE(ratio, lo) << x;
        ASSERT_LE(ratio, hi) << x;
        ASSERT_EQ(std::signbit(out[j]), std::signbit(v[j]));
        ASSERT_TRUE(representable(out[j], dtype));
      }
    }
  }
}

TEST(ExpMul, Bf16OutputStaysBf16) {
  const float v = round_to_dtype(3.3f, Dtype::BF16);
  const VectorF out = expmul(-2.0f, VectorF{Dtype::BF16, {v}});
  EXPECT_EQ(out.dtype, Dtype::BF16);
  EXPECT_EQ(bits(out.elements[0]) & 0xFFFFu, 0u);
  EXPECT_EQ(bits(out.elements[0]) & 0x807FFFFFu, bits(v) & 0x807FFFFFu);
}
