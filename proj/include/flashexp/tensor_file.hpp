#pragma once

// ATNT tensor file, all fields little-endian:
//
//   offset  size  field
//   0       4     magic "ATNT"
//   4       2     version (1)
//   6       2     dtype code (0 = FP32, 1 = BF16)
//   8       4     rows
//   12      4     cols
//   16      ...   rows*cols raw IEEE bit patterns, row-major (4 or 2 bytes each)

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "flashexp/floatbits.hpp"
#include "flashexp/tensor.hpp"

namespace flashexp {

class TensorFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 4> kTensorMagic{'A', 'T', 'N', 'T'};
inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 16;

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

[[nodiscard]] inline std::uint64_t get_le(const std::uint8_t* p, int bytes) noexcept {
  std::uint64_t value = 0;
  for (int i = 0; i < bytes; ++i) value |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return value;
}

}  // namespace detail

[[nodiscard]] inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rows() > std::numeric_limits<std::uint32_t>::max() ||
      t.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw TensorFileError("tensor too large for ATNT header");
  }
  const int width = info(t.dtype()).storage_bytes;
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + t.size() * static_cast<std::size_t>(width));
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  detail::put_le(out, kTensorFileVersion, 2);
  detail::put_le(out, static_cast<std::uint16_t>(t.dtype()), 2);
  detail::put_le(out, t.rows(), 4);
  detail::put_le(out, t.cols(), 4);
  for (float v : t.data()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    if (t.dtype() == Dtype::BF16) {
      if (!representable(v, Dtype::BF16)) {
        throw TensorFileError("bf16 tensor holds a value with FP32-only mantissa bits");
      }
      detail::put_le(out, bits >> 16, 2);
    } else {
      detail::put_le(out, bits, 4);
    }
  }
  return out;
}

/// Decodes an ATNT buffer. `name` is used in diagnostics.
[[nodiscard]] inline Tensor decode_tensor(const std::vector<std::uint8_t>& bytes,
                                          const std::string& name = "tensor") {
  if (bytes.size() < kTensorHeaderBytes) {
    throw TensorFileError(name + ": truncated header");
  }
  if (!std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin())) {
    throw TensorFileError(name + ": bad magic bytes (expected ATNT)");
  }
  const auto* p = bytes.data();
  const auto version = detail::get_le(p + 4, 2);
  if (version != kTensorFileVersion) {
    throw TensorFileError(name + ": unsupported version " + std::to_string(version));
  }
  const auto code = detail::get_le(p + 6, 2);
  if (code > 1) {
    throw TensorFileError(name + ": unknown dtype code " + std::to_string(code));
  }
  const auto dtype = static_cast<Dtype>(code);
  const std::size_t rows = detail::get_le(p + 8, 4);
  const std::size_t cols = detail::get_le(p + 12, 4);
  const auto width = static_cast<std::size_t>(info(dtype).storage_bytes);
  const std::size_t count = rows * cols;
  if (bytes.size() != kTensorHeaderBytes + count * width) {
    throw TensorFileError(name + ": payload length does not match " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " " + std::string(to_string(dtype)));
  }
  std::vector<float> data(count);
  const auto* payload = p + kTensorHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) {
    const auto raw = detail::get_le(payload + i * width, static_cast<int>(width));
    const auto bits = dtype == Dtype::BF16 ? static_cast<std::uint32_t>(raw << 16)
                                           : static_cast<std::uint32_t>(raw);
    data[i] = std::bit_cast<float>(bits);
  }
  return Tensor(rows, cols, dtype, std::move(data));
}

inline void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw TensorFileError(path.string() + ": cannot open for writing");
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) {
    throw TensorFileError(path.string() + ": write failed");
  }
}

[[nodiscard]] inline Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw TensorFileError(path.string() + ": cannot open for reading");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

}  // namespace flashexp
