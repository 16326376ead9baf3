#pragma once

// Attention kernels over a block of queries, streaming one key/value row per
// step:
//
//   attention_baseline_lazy   two passes, division deferred to the end
//   attention_flash2          single pass with a running max (online softmax)
//   attention_flash2_expmul   single pass on the merged state [l, o], both
//                             rescalings done by ExpMul
//
// Arithmetic is parameterized by a policy. FP32 runs every step in float;
// BF16 runs the step in float and rounds the stored result back to BF16;
// F64 widens everything to double and serves as the exact-arithmetic twin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

#include "flashexp/expmul.hpp"
#include "flashexp/fixedlog.hpp"
#include "flashexp/floatbits.hpp"
#include "flashexp/refmodel.hpp"
#include "flashexp/tensor.hpp"

namespace flashexp {

enum class KernelKind : std::uint8_t { BaselineLazy, Flash2Exact, Flash2ExpMul };

/// Exponential used by BaselineLazy and Flash2Exact. Flash2ExpMul ignores it.
enum class ExpMode : std::uint8_t { Accurate, Pwl };

[[nodiscard]] constexpr std::string_view to_string(KernelKind kind) noexcept {
  switch (kind) {
    case KernelKind::BaselineLazy:
      return "baseline";
    case KernelKind::Flash2Exact:
      return "flash2";
    case KernelKind::Flash2ExpMul:
    default:
      return "flash2-expmul";
  }
}

[[nodiscard]] constexpr std::string_view to_string(ExpMode mode) noexcept {
  return mode == ExpMode::Pwl ? "pwl" : "accurate";
}

[[nodiscard]] inline KernelKind parse_kernel(std::string_view name) {
  if (name == "baseline") return KernelKind::BaselineLazy;
  if (name == "flash2") return KernelKind::Flash2Exact;
  if (name == "flash2-expmul") return KernelKind::Flash2ExpMul;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

[[nodiscard]] inline ExpMode parse_exp_mode(std::string_view name) {
  if (name == "accurate") return ExpMode::Accurate;
  if (name == "pwl") return ExpMode::Pwl;
  throw std::invalid_argument("unknown exp mode '" + std::string(name) + "'");
}

struct KernelOptions {
  ExpMode exp_mode = ExpMode::Accurate;
  bool scale_by_inv_sqrt_d = false;
  unsigned threads = 1;  // query-level parallelism; results do not depend on it
};

struct KernelRun {
  Tensor output;
  std::uint64_t flushed = 0;  // ExpMul elements underflowed to zero
  std::uint64_t clipped = 0;  // ExpMul calls with a finite argument below -15
};

namespace arith {

struct Fp32 {
  using real = float;
  static constexpr Dtype dtype = Dtype::FP32;
  static real store(real x) noexcept { return x; }
};

struct Bf16 {
  using real = float;
  static constexpr Dtype dtype = Dtype::BF16;
  static real store(real x) noexcept { return round_fp32_to_bf16(x).to_float(); }
};

struct F64 {
  using real = double;
  static real store(real x) noexcept { return x; }
};

}  // namespace arith

[[nodiscard]] constexpr float max_update(float m_prev, float s) noexcept { return s > m_prev ? s : m_prev; }
[[nodiscard]] constexpr double max_update(double m_prev, double s) noexcept { return s > m_prev ? s : m_prev; }

namespace detail {

template <typename A, typename In>
[[nodiscard]] typename A::real dot(std::span<const In> q, std::span<const In> k) {
  using R = typename A::real;
  R acc = 0;
  for (std::size_t c = 0; c < q.size(); ++c) acc += static_cast<R>(q[c]) * static_cast<R>(k[c]);
  return A::store(acc);
}

template <typename A>
[[nodiscard]] typename A::real exp_step(typename A::real x, ExpMode mode) {
  using R = typename A::real;
  const double xd = static_cast<double>(x);
  const double e = mode == ExpMode::Accurate ? std::exp(xd) : pwl_exp(xd < -15.0 ? -15.0 : xd);
  return A::store(static_cast<R>(e));
}

template <typename A>
struct Scorer {
  using R = typename A::real;
  bool scaled = false;
  R inv_sqrt_d = 1;

  Scorer(std::size_t d, bool scale)
      : scaled(scale), inv_sqrt_d(static_cast<R>(1.0 / std::sqrt(static_cast<double>(d)))) {}

  template <typename In>
  [[nodiscard]] R operator()(std::span<const In> q, std::span<const In> k) const {
    const R s = dot<A>(q, k);
    return scaled ? A::store(s * inv_sqrt_d) : s;
  }
};

template <typename M>
void check_shapes(const M& q, const M& k, const M& v) {
  if (k.rows() == 0) {
    throw std::domain_error("attention: no keys (N = 0)");
  }
  if (q.cols() != k.cols()) {
    throw std::invalid_argument("attention: query width " + std::to_string(q.cols()) +
                                " != key width " + std::to_string(k.cols()));
  }
  if (k.rows() != v.rows()) {
    throw std::invalid_argument("attention: " + std::to_string(k.rows()) + " keys but " +
                                std::to_string(v.rows()) + " values");
  }
}

inline void check_tensors(const Tensor& q, const Tensor& k, const Tensor& v) {
  check_shapes(q, k, v);
  if (q.dtype() != k.dtype() || q.dtype() != v.dtype()) {
    throw std::invalid_argument("attention: Q, K, V dtypes differ");
  }
  require_finite(q, "Q");
  require_finite(k, "K");
  require_finite(v, "V");
}

/// Runs fn(row) for every row in [0, rows), split into contiguous chunks.
template <typename Fn>
void for_each_query(std::size_t rows, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(rows, 1));
  if (workers == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t r = begin; r < end; ++r) fn(r);
    });
  }
}

template <typename A, typename M>
void baseline_row(const M& q, const M& k, const M& v, std::size_t r, const KernelOptions& opt,
                  std::span<typename A::real> out) {
  using R = typename A::real;
  const Scorer<A> score(q.cols(), opt.scale_by_inv_sqrt_d);
  std::vector<R> scores(k.rows());
  R m = -std::numeric_limits<R>::infinity();
  for (std::size_t i = 0; i < k.rows(); ++i) {
    scores[i] = score(q.row(r), k.row(i));
    m = max_update(m, scores[i]);
  }
  R ell = 0;
  std::vector<R> acc(v.cols(), R{0});
  for (std::size_t i = 0; i < k.rows(); ++i) {
    const R e = exp_step<A>(scores[i] - m, opt.exp_mode);
    ell = A::store(ell + e);
    const auto vi = v.row(i);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] = A::store(acc[c] + e * static_cast<R>(vi[c]));
  }
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = A::store(acc[c] / ell);
}

template <typename A, typename M>
void flash2_row(const M& q, const M& k, const M& v, std::size_t r, const KernelOptions& opt,
                std::span<typename A::real> out) {
  using R = typename A::real;
  const Scorer<A> score(q.cols(), opt.scale_by_inv_sqrt_d);
  R m = -std::numeric_limits<R>::infinity();
  R ell = 0;
  std::vector<R> acc(v.cols(), R{0});
  for (std::size_t i = 0; i < k.rows(); ++i) {
    const R s = score(q.row(r), k.row(i));
    const R m_new = max_update(m, s);
    const R rescale = exp_step<A>(m - m_new, opt.exp_mode);
    const R weight = exp_step<A>(s - m_new, opt.exp_mode);
    ell = A::store(ell * rescale + weight);
    const auto vi = v.row(i);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      acc[c] = A::store(acc[c] * rescale + static_cast<R>(vi[c]) * weight);
    }
    m = m_new;
  }
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = A::store(acc[c] / ell);
}

struct RowStats {
  std::uint64_t flushed = 0;
  std::uint64_t clipped = 0;
};

template <typename A>
RowStats flash2_expmul_row(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t r,
                           const KernelOptions& opt, std::span<float> out) {
  static_assert(std::is_same_v<typename A::real, float>, "ExpMul operates on FP32/BF16 storage");
  const Scorer<A> score(q.cols(), opt.scale_by_inv_sqrt_d);
  const std::size_t width = v.cols() + 1;
  // merged state o* = [l, o] and v* = [1, v]
  std::vector<float> state(width, 0.0f);
  std::vector<float> vstar(width);
  std::vector<float> term(width);
  RowStats stats;
  float m = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < k.rows(); ++i) {
    const float s = score(q.row(r), k.row(i));
    const float m_new = max_update(m, s);

    const ExpMulStats carried = expmul(m - m_new, state, A::dtype, state);
    vstar[0] = 1.0f;
    std::ranges::copy(v.row(i), vstar.begin() + 1);
    const ExpMulStats fresh = expmul(s - m_new, vstar, A::dtype, term);
    for (std::size_t c = 0; c < width; ++c) state[c] = A::store(state[c] + term[c]);

    stats.flushed += carried.flushed + fresh.flushed;
    stats.clipped += static_cast<std::uint64_t>(carried.clipped) + static_cast<std::uint64_t>(fresh.clipped);
    m = m_new;
  }
  const float ell = state[0];
  for (std::size_t c = 0; c + 1 < width; ++c) out[c] = A::store(state[c + 1] / ell);
  return stats;
}

template <typename A, typename Row>
Tensor run_rows(const Tensor& q, const Tensor& v, const KernelOptions& opt, Row&& row_fn) {
  Tensor out(q.rows(), v.cols(), A::dtype);
  detail::for_each_query(q.rows(), opt.threads, [&](std::size_t r) { row_fn(r, out.row(r)); });
  return out;
}

template <typename Kernel>
Tensor dispatch_dtype(const Tensor& q, const Tensor& k, const Tensor& v, const KernelOptions& opt) {
  check_tensors(q, k, v);
  if (q.dtype() == Dtype::BF16) {
    return run_rows<arith::Bf16>(q, v, opt, [&](std::size_t r, std::span<float> dst) {
      Kernel::template row<arith::Bf16>(q, k, v, r, opt, dst);
    });
  }
  return run_rows<arith::Fp32>(q, v, opt, [&](std::size_t r, std::span<float> dst) {
    Kernel::template row<arith::Fp32>(q, k, v, r, opt, dst);
  });
}

struct BaselineKernel {
  template <typename A, typename M, typename Out>
  static void row(const M& q, const M& k, const M& v, std::size_t r, const KernelOptions& opt, Out dst) {
    baseline_row<A>(q, k, v, r, opt, dst);
  }
};

struct Flash2Kernel {
  template <typename A, typename M, typename Out>
  static void row(const M& q, const M& k, const M& v, std::size_t r, const KernelOptions& opt, Out dst) {
    flash2_row<A>(q, k, v, r, opt, dst);
  }
};

template <typename Kernel>
MatrixD run_f64(const MatrixD& q, const MatrixD& k, const MatrixD& v, const KernelOptions& opt) {
  check_shapes(q, k, v);
  MatrixD out(q.rows(), v.cols());
  for_each_query(q.rows(), opt.threads, [&](std::size_t r) {
    Kernel::template row<arith::F64>(q, k, v, r, opt, out.row(r));
  });
  return out;
}

}  // namespace detail

/// Sum of products accumulated in FP32, rounded to the operands' dtype.
[[nodiscard]] inline float dot(const VectorF& q, const VectorF& k) {
  if (q.elements.size() != k.elements.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  if (q.dtype != k.dtype) {
    throw std::invalid_argument("dot: dtype mismatch");
  }
  const std::span<const float> a = q.elements;
  const std::span<const float> b = k.elements;
  return q.dtype == Dtype::BF16 ? detail::dot<arith::Bf16>(a, b) : detail::dot<arith::Fp32>(a, b);
}

[[nodiscard]] inline Tensor attention_baseline_lazy(const Tensor& q, const Tensor& k, const Tensor& v,
                                                    const KernelOptions& opt = {}) {
  return detail::dispatch_dtype<detail::BaselineKernel>(q, k, v, opt);
}

[[nodiscard]] inline Tensor attention_flash2(const Tensor& q, const Tensor& k, const Tensor& v,
                                             const KernelOptions& opt = {}) {
  return detail::dispatch_dtype<detail::Flash2Kernel>(q, k, v, opt);
}

/// FlashAttention-2 with both rescalings done by ExpMul on the merged state.
[[nodiscard]] inline KernelRun attention_flash2_expmul_run(const Tensor& q, const Tensor& k, const Tensor& v,
                                                           const KernelOptions& opt = {}) {
  detail::check_tensors(q, k, v);
  std::vector<detail::RowStats> per_row(q.rows());
  auto body = [&]<typename A>(std::size_t r, std::span<float> dst) {
    per_row[r] = detail::flash2_expmul_row<A>(q, k, v, r, opt, dst);
  };
  KernelRun run;
  if (q.dtype() == Dtype::BF16) {
    run.output = detail::run_rows<arith::Bf16>(
        q, v, opt, [&](std::size_t r, std::span<float> dst) { body.template operator()<arith::Bf16>(r, dst); });
  } else {
    run.output = detail::run_rows<arith::Fp32>(
        q, v, opt, [&](std::size_t r, std::span<float> dst) { body.template operator()<arith::Fp32>(r, dst); });
  }
  for (const auto& s : per_row) {
    run.flushed += s.flushed;
    run.clipped += s.clipped;
  }
  return run;
}

[[nodiscard]] inline Tensor attention_flash2_expmul(const Tensor& q, const Tensor& k, const Tensor& v,
                                                    const KernelOptions& opt = {}) {
  return attention_flash2_expmul_run(q, k, v, opt).output;
}

/// Double-precision twins of the exact kernels.
[[nodiscard]] inline MatrixD attention_baseline_lazy_f64(const MatrixD& q, const MatrixD& k, const MatrixD& v,
                                                         const KernelOptions& opt = {}) {
  return detail::run_f64<detail::BaselineKernel>(q, k, v, opt);
}

[[nodiscard]] inline MatrixD attention_flash2_f64(const MatrixD& q, const MatrixD& k, const MatrixD& v,
                                                  const KernelOptions& opt = {}) {
  return detail::run_f64<detail::Flash2Kernel>(q, k, v, opt);
}

[[nodiscard]] inline KernelRun run_kernel(KernelKind kind, const Tensor& q, const Tensor& k, const Tensor& v,
                                          const KernelOptions& opt = {}) {
  switch (kind) {
    case KernelKind::BaselineLazy:
      return {attention_baseline_lazy(q, k, v, opt)};
    case KernelKind::Flash2Exact:
      return {attention_flash2(q, k, v, opt)};
    case KernelKind::Flash2ExpMul:
    default:
      return attention_flash2_expmul_run(q, k, v, opt);
  }
}

}  // namespace flashexp
