// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cascade {

enum class DType : uint8_t { FP32 = 1, INT8 = 2 };

inline std::size_t dtype_size(DType dt) noexcept {
  return dt == DType::FP32 ? 4 : 1;
}

struct QuantParams {
  float scale = 1.0f;
  int8_t zero_point = 0;

  bool operator==(const QuantParams&) const = default;
};

using Shape = std::vector<uint32_t>;

uint64_t shape_elements(const Shape& shape) noexcept;

/// Dense row-major tensor holding either FP32 scalars or INT8 scalars with
/// per-tensor affine quantization parameters. Immutable after construction.
class Tensor {
 public:
  Tensor() : Tensor(Shape{0}, std::vector<float>{}) {}

  /// Throws ShapeMismatch if the element count disagrees with `shape`.
  Tensor(Shape shape, std::vector<float> values);
  Tensor(Shape shape, std::vector<int8_t> values, QuantParams quant);

  static Tensor zeros(Shape shape);

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  uint64_t size() const noexcept { return shape_elements(shape_); }
  const std::optional<QuantParams>& quant() const noexcept { return quant_; }

  /// Empty span when the dtype does not match.
  std::span<const float> f32() const noexcept { return f32_; }
  std::span<const int8_t> i8() const noexcept { return i8_; }

  bool operator==(const Tensor&) const = default;

 private:
  DType dtype_ = DType::FP32;
  Shape shape_;
  std::vector<float> f32_;
  std::vector<int8_t> i8_;
  std::optional<QuantParams> quant_;
};

/// Per-tensor asymmetric INT8 quantization. The range is widened to contain
/// zero so the zero point always fits in int8.
Tensor quantize_linear(const Tensor& t);

/// v = (q - zero_point) * scale.
Tensor dequantize(const Tensor& t);

/// product(shape) * dtype size; quantization parameters are not counted.
uint64_t memory_bytes(const Tensor& t) noexcept;

}  // namespace cascade
