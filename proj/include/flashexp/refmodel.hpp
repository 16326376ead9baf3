#pragma once

// Double-precision reference attention, the piecewise-linear exponential
// used by the baseline hardware model, and output-vs-oracle metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flashexp/tensor.hpp"

namespace flashexp {

/// Chord interpolation of e^x over `segments` uniform pieces of [lo, 0].
/// Knot values are exact std::exp results; between knots the chord of a
/// convex function lies above it, so the result never undershoots e^x.
class PiecewiseLinearExp {
 public:
  explicit PiecewiseLinearExp(int segments = 16, double lo = -15.0)
      : lo_(lo), width_(-lo / segments), knots_(static_cast<std::size_t>(segments) + 1) {
    if (segments < 1 || !(lo < 0.0)) {
      throw std::invalid_argument("PiecewiseLinearExp: need segments >= 1 and lo < 0");
    }
    for (std::size_t k = 0; k < knots_.size(); ++k) {
      knots_[k] = std::exp(knot(k));
    }
  }

  [[nodiscard]] int segments() const noexcept { return static_cast<int>(knots_.size()) - 1; }
  [[nodiscard]] double lo() const noexcept { return lo_; }
  [[nodiscard]] double knot(std::size_t k) const noexcept {
    return k + 1 == knots_.size() ? 0.0 : lo_ + static_cast<double>(k) * width_;
  }

  /// x must lie in [lo, 0]; callers clip first.
  [[nodiscard]] double operator()(double x) const {
    if (!(x >= lo_ && x <= 0.0)) {
      throw std::invalid_argument("pwl_exp: input outside the table range");
    }
    const auto last = knots_.size() - 2;
    const auto k = std::min(static_cast<std::size_t>((x - lo_) / width_), last);
    const double t = (x - knot(k)) / width_;
    if (t <= 0.0) return knots_[k];
    if (t >= 1.0) return knots_[k + 1];
    return knots_[k] + (knots_[k + 1] - knots_[k]) * t;
  }

 private:
  double lo_;
  double width_;
  std::vector<double> knots_;
};

/// 16-segment table on [-15, 0].
[[nodiscard]] inline double pwl_exp(double x) {
  static const PiecewiseLinearExp table;
  return table(x);
}

/// Two-pass softmax attention in double precision, without max subtraction.
/// Scores must stay well inside the double exponent range.
[[nodiscard]] inline MatrixD oracle_attention(const MatrixD& q, const MatrixD& k, const MatrixD& v,
                                              bool scale_by_inv_sqrt_d = false) {
  if (k.rows() == 0) {
    throw std::domain_error("oracle_attention: no keys (N = 0)");
  }
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw std::invalid_argument("oracle_attention: inconsistent shapes");
  }
  const double scale = scale_by_inv_sqrt_d ? 1.0 / std::sqrt(static_cast<double>(q.cols())) : 1.0;
  MatrixD out(q.rows(), v.cols());
  std::vector<double> weights(k.rows());
  for (std::size_t r = 0; r < q.rows(); ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < k.rows(); ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(r, c) * k(i, c);
      weights[i] = std::exp(s * scale);
      total += weights[i];
    }
    auto dst = out.row(r);
    for (std::size_t i = 0; i < v.rows(); ++i) {
      const double p = weights[i] / total;
      const auto vi = v.row(i);
      for (std::size_t c = 0; c < v.cols(); ++c) dst[c] += p * vi[c];
    }
  }
  return out;
}

[[nodiscard]] inline MatrixD oracle_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              bool scale_by_inv_sqrt_d = false) {
  return oracle_attention(q.to_double(), k.to_double(), v.to_double(), scale_by_inv_sqrt_d);
}

struct AccuracyReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double mean_abs_err = 0.0;
  double cosine_similarity_min = 1.0;  // minimum over rows
  std::uint64_t flushed_count = 0;
};

/// Metrics of `out` against `ref`. Relative error uses |ref| + 1e-30.
/// A row pair that is all-zero on both sides has cosine 1; one zero side gives 0.
[[nodiscard]] inline AccuracyReport compare(const MatrixD& out, const MatrixD& ref,
                                            std::uint64_t flushed_count = 0) {
  if (out.rows() != ref.rows() || out.cols() != ref.cols()) {
    throw std::invalid_argument("compare: shape mismatch");
  }
  AccuracyReport report;
  report.flushed_count = flushed_count;
  double abs_sum = 0.0;
  for (std::size_t r = 0; r < ref.rows(); ++r) {
    const auto a = out.row(r);
    const auto b = ref.row(r);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < ref.cols(); ++c) {
      const double err = std::abs(a[c] - b[c]);
      abs_sum += err;
      report.max_abs_err = std::max(report.max_abs_err, err);
      report.max_rel_err = std::max(report.max_rel_err, err / (std::abs(b[c]) + 1e-30));
      dot += a[c] * b[c];
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    double cosine = 1.0;
    if (na > 0.0 && nb > 0.0) {
      cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    } else if (na > 0.0 || nb > 0.0) {
      cosine = 0.0;
    }
    report.cosine_similarity_min = std::min(report.cosine_similarity_min, cosine);
  }
  if (ref.size() > 0) report.mean_abs_err = abs_sum / static_cast<double>(ref.size());
  return report;
}

[[nodiscard]] inline AccuracyReport compare(const Tensor& out, const MatrixD& ref,
                                            std::uint64_t flushed_count = 0) {
  return compare(out.to_double(), ref, flushed_count);
}

}  // namespace flashexp
