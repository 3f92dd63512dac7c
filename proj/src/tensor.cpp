// SPDX-License-Identifier: Apache-2.0
#include "cascade/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cascade/error.hpp"

namespace cascade {

uint64_t shape_elements(const Shape& shape) noexcept {
  uint64_t n = 1;
  for (uint32_t d : shape) n *= d;
  return n;
}

namespace {

void check_count(const Shape& shape, std::size_t count) {
  if (shape_elements(shape) != count) {
    throw Error(ErrorCode::ShapeMismatch,
                "tensor shape holds " + std::to_string(shape_elements(shape)) +
                    " elements but " + std::to_string(count) + " were given");
  }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<float> values)
    : dtype_(DType::FP32), shape_(std::move(shape)), f32_(std::move(values)) {
  check_count(shape_, f32_.size());
}

Tensor::Tensor(Shape shape, std::vector<int8_t> values, QuantParams quant)
    : dtype_(DType::INT8),
      shape_(std::move(shape)),
      i8_(std::move(values)),
      quant_(quant) {
  check_count(shape_, i8_.size());
  if (!(quant.scale > 0.0f) || !std::isfinite(quant.scale)) {
    throw Error(ErrorCode::InvalidArgument, "quantization scale must be positive");
  }
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_elements(shape);
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

Tensor quantize_linear(const Tensor& t) {
  if (t.dtype() != DType::FP32) {
    throw Error(ErrorCode::InvalidArgument, "quantize_linear expects an FP32 tensor");
  }
  const auto values = t.f32();
  float lo = 0.0f;
  float hi = 0.0f;
  bool first = true;
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFinite, "quantize_linear: tensor holds NaN or Inf");
    }
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  double scale;
  int zero_point;
  if (lo == hi) {
    scale = std::max(static_cast<double>(std::fabs(hi)), 1e-8) / 127.0;
    zero_point = 0;
  } else {
    const double rlo = std::min<double>(lo, 0.0);
    const double rhi = std::max<double>(hi, 0.0);
    scale = (rhi - rlo) / 255.0;
    zero_point = static_cast<int>(std::lround(-128.0 - rlo / scale));
    zero_point = std::clamp(zero_point, -128, 127);
  }
  const auto fscale = static_cast<float>(scale);

  std::vector<int8_t> q(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const long r = std::lround(static_cast<double>(values[i]) / fscale) + zero_point;
    q[i] = static_cast<int8_t>(std::clamp<long>(r, -128, 127));
  }
  return Tensor(t.shape(), std::move(q),
                QuantParams{fscale, static_cast<int8_t>(zero_point)});
}

Tensor dequantize(const Tensor& t) {
  if (t.dtype() != DType::INT8 || !t.quant()) {
    throw Error(ErrorCode::MissingQuantParams, "dequantize: tensor carries no quantization parameters");
  }
  const auto [scale, zp] = *t.quant();
  const auto q = t.i8();
  std::vector<float> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = static_cast<float>((static_cast<int>(q[i]) - zp) * static_cast<double>(scale));
  }
  return Tensor(t.shape(), std::move(out));
}

uint64_t memory_bytes(const Tensor& t) noexcept {
  return t.size() * dtype_size(t.dtype());
}

}  // namespace cascade
