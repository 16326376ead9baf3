#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flashexp/floatbits.hpp"

namespace flashexp {

/// Row-major matrix.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data size does not match shape");
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  [[nodiscard]] const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixD = Matrix<double>;

/// Dtype-tagged FP32/BF16 matrix. BF16 elements are stored as floats with
/// zero low halves.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, Dtype dtype) : dtype_(dtype), values_(rows, cols) {}
  Tensor(std::size_t rows, std::size_t cols, Dtype dtype, std::vector<float> data)
      : dtype_(dtype), values_(rows, cols, std::move(data)) {}

  [[nodiscard]] Dtype dtype() const noexcept { return dtype_; }
  [[nodiscard]] std::size_t rows() const noexcept { return values_.rows(); }
  [[nodiscard]] std::size_t cols() const noexcept { return values_.cols(); }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] std::span<float> row(std::size_t r) noexcept { return values_.row(r); }
  [[nodiscard]] std::span<const float> row(std::size_t r) const noexcept { return values_.row(r); }
  [[nodiscard]] float& operator()(std::size_t r, std::size_t c) noexcept { return values_(r, c); }
  [[nodiscard]] float operator()(std::size_t r, std::size_t c) const noexcept { return values_(r, c); }
  [[nodiscard]] std::span<float> data() noexcept { return values_.data(); }
  [[nodiscard]] std::span<const float> data() const noexcept { return values_.data(); }

  [[nodiscard]] MatrixD to_double() const {
    MatrixD out(rows(), cols());
    for (std::size_t i = 0; i < size(); ++i) out.data()[i] = data()[i];
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Dtype dtype_ = Dtype::FP32;
  Matrix<float> values_;
};

/// Ingest check: every element finite and representable in the tag dtype.
inline void require_finite(const Tensor& t, const std::string& name) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw std::domain_error(name + ": tensor contains NaN or infinity");
    }
    if (!representable(v, t.dtype())) {
      throw std::invalid_argument(name + ": element not representable in bf16");
    }
  }
}

/// Rounds every element to `dtype`.
[[nodiscard]] inline Tensor cast(const Tensor& t, Dtype dtype) {
  Tensor out(t.rows(), t.cols(), dtype);
  for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] = round_to_dtype(t.data()[i], dtype);
  return out;
}

}  // namespace flashexp
