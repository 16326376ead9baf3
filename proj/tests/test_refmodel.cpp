#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "flashexp/refmodel.hpp"
#include "support/oracles.hpp"

using namespace flashexp;

namespace {

// Measured once over a 2^16-point grid of [-15, 0]: 0.114658 (segment width
// 0.9375, roughly w^2 / 8). Pinned with a little headroom.
constexpr double kPwlMaxRelErrBound = 0.1147;

}  // namespace

TEST(PwlExp, Knots) {
  EXPECT_EQ(pwl_exp(0.0), 1.0);
  EXPECT_EQ(pwl_exp(-15.0), std::exp(-15.0));
  EXPECT_NEAR(pwl_exp(-15.0), 3.06e-7, 0.01e-7);
  for (int k = 0; k <= 16; ++k) {
    const double x = -15.0 + k * (15.0 / 16.0);
    EXPECT_EQ(pwl_exp(x), std::exp(x)) << k;
  }
}

TEST(PwlExp, MidSegmentIsChordMidpoint) {
  const double expected = 0.5 * (std::exp(0.0) + std::exp(-0.9375));
  EXPECT_NEAR(pwl_exp(-0.46875), expected, 1e-16);
}

TEST(PwlExp, ChordAboveCurveAndMonotone) {
  constexpr int kPoints = 1 << 12;
  double previous = 0.0;
  for (int i = 0; i <= kPoints; ++i) {
    const double x = -15.0 + 15.0 * i / kPoints;
    const double y = pwl_exp(x);
    ASSERT_GE(y, std::exp(x)) << x;
    if (i > 0) ASSERT_GT(y, previous) << x;
    previous = y;
  }
}

TEST(PwlExp, MaxRelativeErrorIsPinned) {
  constexpr int kPoints = 1 << 16;
  double worst = 0.0;
  for (int i = 0; i <= kPoints; ++i) {
    const double x = -15.0 + 15.0 * i / kPoints;
    worst = std::max(worst, pwl_exp(x) / std::exp(x) - 1.0);
  }
  EXPECT_LE(worst, kPwlMaxRelErrBound);
  EXPECT_GT(worst, 0.114);
}

TEST(PwlExp, ConfigurableSegments) {
  const PiecewiseLinearExp fine(64);
  EXPECT_EQ(fine.segments(), 64);
  EXPECT_LT(fine(-7.3) / std::exp(-7.3) - 1.0, pwl_exp(-7.3) / std::exp(-7.3) - 1.0);
  EXPECT_THROW((void)fine(0.1), std::invalid_argument);
  EXPECT_THROW((void)PiecewiseLinearExp(0), std::invalid_argument);
}

TEST(Oracle, SingleKeyAndEqualScores) {
  const MatrixD q(1, 2, {0.4, -0.1});
  EXPECT_EQ(oracle_attention(q, MatrixD(1, 2, {1, 2}), MatrixD(1, 3, {5, 6, 7})), MatrixD(1, 3, {5, 6, 7}));
  const MatrixD mean = oracle_attention(MatrixD(1, 2, {0, 0}), MatrixD(2, 2, {1, 2, 3, 4}), MatrixD(2, 1, {1, 4}));
  EXPECT_DOUBLE_EQ(mean(0, 0), 2.5);
}

TEST(Oracle, TwoKeyInstance) {
  const MatrixD out = oracle_attention(MatrixD(1, 2, {1, 0}), MatrixD(2, 2, {1, 0, 0, 1}), MatrixD(2, 2, {1, 0, 0, 1}));
  const auto expected = oracle::attention_row({1.0, 0.0}, {{1, 0}, {0, 1}});
  EXPECT_NEAR(out(0, 0), static_cast<double>(expected[0]), 1e-15);
  EXPECT_NEAR(out(0, 1), static_cast<double>(expected[1]), 1e-15);
  EXPECT_NEAR(out(0, 0), 0.73106, 1e-5);
}

TEST(Oracle, Errors) {
  EXPECT_THROW((void)oracle_attention(MatrixD(1, 2), MatrixD(0, 2), MatrixD(0, 2)), std::domain_error);
  EXPECT_THROW((void)oracle_attention(MatrixD(1, 2), MatrixD(1, 3), MatrixD(1, 2)), std::invalid_argument);
}

TEST(Compare, IdenticalIsZeroReport) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-3, 3);
  MatrixD a(5, 7);
  for (double& x : a.data()) x = dist(rng);
  const AccuracyReport r = compare(a, a);
  EXPECT_EQ(r.max_abs_err, 0.0);
  EXPECT_EQ(r.max_rel_err, 0.0);
  EXPECT_EQ(r.mean_abs_err, 0.0);
  EXPECT_DOUBLE_EQ(r.cosine_similarity_min, 1.0);
  EXPECT_EQ(r.flushed_count, 0u);
}

TEST(Compare, ScaledCopy) {
  const MatrixD ref(2, 2, {1.0, -2.0, 0.5, 4.0});
  MatrixD twice = ref;
  for (double& x : twice.data()) x *= 2.0;
  const AccuracyReport r = compare(twice, ref, 3);
  EXPECT_DOUBLE_EQ(r.max_rel_err, 1.0);
  EXPECT_DOUBLE_EQ(r.max_abs_err, 4.0);
  EXPECT_DOUBLE_EQ(r.mean_abs_err, 7.5 / 4);
  EXPECT_DOUBLE_EQ(r.cosine_similarity_min, 1.0);
  EXPECT_EQ(r.flushed_count, 3u);
}

TEST(Compare, ZeroRowsAndOrthogonality) {
  const MatrixD zeros(1, 2, {0, 0});
  EXPECT_EQ(compare(zeros, zeros).cosine_similarity_min, 1.0);
  EXPECT_EQ(compare(MatrixD(1, 2, {1, 0}), zeros).cosine_similarity_min, 0.0);
  EXPECT_EQ(compare(MatrixD(1, 2, {1, 0}), MatrixD(1, 2, {0, 1})).cosine_similarity_min, 0.0);
  EXPECT_EQ(compare(MatrixD(1, 2, {-1, 0}), MatrixD(1, 2, {1, 0})).cosine_similarity_min, -1.0);
}

TEST(Compare, ShapeMismatch) {
  EXPECT_THROW((void)compare(MatrixD(1, 2), MatrixD(2, 1)), std::invalid_argument);
}
