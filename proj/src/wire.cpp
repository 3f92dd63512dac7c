// SPDX-License-Identifier: Apache-2.0
#include "cascade/wire.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <limits>
#include <string>

namespace cascade {

namespace {

constexpr uint8_t kMagic[4] = {'C', 'S', 'C', '1'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

uint32_t crc32_ieee(std::span<const uint8_t> bytes) noexcept {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large frames.
  const uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<uint32_t>(crc);
}

uint64_t predicted_frame_length(std::size_t ndim, DType dtype, uint64_t elements) noexcept {
  return kFrameHeaderBytes + 4 * ndim + (dtype == DType::INT8 ? 5 : 0) +
         elements * dtype_size(dtype) + 4;
}

std::vector<uint8_t> encode_frame(Task task, FrameKind kind, const Tensor& t) {
  if (t.rank() > kMaxFrameDims) {
    throw Error(ErrorCode::TooManyDims,
                "tensor rank " + std::to_string(t.rank()) + " exceeds " + std::to_string(kMaxFrameDims));
  }
  const uint64_t total = predicted_frame_length(t.rank(), t.dtype(), t.size());
  if (total > std::numeric_limits<uint32_t>::max()) {
    throw Error(ErrorCode::DimOverflow, "frame would exceed 4 GiB");
  }
  std::vector<uint8_t> out;
  out.reserve(total);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kWireVersion);
  out.push_back(static_cast<uint8_t>(task));
  out.push_back(static_cast<uint8_t>(kind));
  out.push_back(static_cast<uint8_t>(t.dtype()));
  out.push_back(static_cast<uint8_t>(t.rank()));
  out.insert(out.end(), 3, 0);
  for (uint32_t d : t.shape()) put_u32(out, d);
  if (t.dtype() == DType::INT8) {
    put_u32(out, std::bit_cast<uint32_t>(t.quant()->scale));
    out.push_back(static_cast<uint8_t>(t.quant()->zero_point));
    for (int8_t q : t.i8()) out.push_back(static_cast<uint8_t>(q));
  } else {
    for (float v : t.f32()) put_u32(out, std::bit_cast<uint32_t>(v));
  }
  put_u32(out, crc32_ieee(out));
  return out;
}

DecodedFrame decode_frame(std::span<const uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "frame does not start with CSC1");
  }
  if (bytes.size() < 5) throw Error(ErrorCode::Truncated, "frame shorter than its header");
  if (bytes[4] != kWireVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                "frame version " + std::to_string(bytes[4]) + " is not supported");
  }
  if (bytes.size() < kFrameHeaderBytes) {
    throw Error(ErrorCode::Truncated, "frame shorter than its header");
  }
  const uint8_t dtype_raw = bytes[7];
  if (dtype_raw != 1 && dtype_raw != 2) {
    throw Error(ErrorCode::UnknownEnum, "unknown dtype " + std::to_string(dtype_raw));
  }
  const auto dtype = static_cast<DType>(dtype_raw);
  const std::size_t ndim = bytes[8];
  if (ndim > kMaxFrameDims) {
    throw Error(ErrorCode::TooManyDims, "frame declares " + std::to_string(ndim) + " dims");
  }
  if (bytes.size() < kFrameHeaderBytes + 4 * ndim) {
    throw Error(ErrorCode::Truncated, "frame ends inside its dims");
  }
  Shape shape(ndim);
  uint64_t elements = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes.data() + kFrameHeaderBytes + 4 * i);
    elements *= shape[i];
    if (elements > bytes.size()) {
      throw Error(ErrorCode::Truncated, "frame dims describe more data than was received");
    }
  }
  const uint64_t expected = predicted_frame_length(ndim, dtype, elements);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::Truncated, "frame is " + std::to_string(bytes.size()) +
                                          " bytes but its header implies " + std::to_string(expected));
  }
  const std::size_t body = bytes.size() - 4;
  if (crc32_ieee(bytes.first(body)) != get_u32(bytes.data() + body)) {
    throw Error(ErrorCode::CrcMismatch, "frame checksum mismatch");
  }
  if (bytes[9] != 0 || bytes[10] != 0 || bytes[11] != 0) {
    throw Error(ErrorCode::UnknownEnum, "reserved header bytes are not zero");
  }
  const uint8_t task = bytes[5];
  const uint8_t kind = bytes[6];
  if (task != 1 && task != 2) throw Error(ErrorCode::UnknownEnum, "unknown task " + std::to_string(task));
  if (kind < 1 || kind > 3) throw Error(ErrorCode::UnknownEnum, "unknown kind " + std::to_string(kind));

  DecodedFrame out;
  out.task = static_cast<Task>(task);
  out.kind = static_cast<FrameKind>(kind);
  std::size_t pos = kFrameHeaderBytes + 4 * ndim;
  if (dtype == DType::INT8) {
    QuantParams qp;
    qp.scale = std::bit_cast<float>(get_u32(bytes.data() + pos));
    qp.zero_point = static_cast<int8_t>(bytes[pos + 4]);
    pos += 5;
    if (!(qp.scale > 0.0f)) throw Error(ErrorCode::UnknownEnum, "INT8 frame with non-positive scale");
    std::vector<int8_t> q(elements);
    std::memcpy(q.data(), bytes.data() + pos, elements);
    out.tensor = Tensor(std::move(shape), std::move(q), qp);
  } else {
    std::vector<float> v(elements);
    for (uint64_t i = 0; i < elements; ++i) {
      v[i] = std::bit_cast<float>(get_u32(bytes.data() + pos + 4 * i));
    }
    out.tensor = Tensor(std::move(shape), std::move(v));
  }
  return out;
}

std::vector<uint8_t> encode_error_frame(Task task, ServiceError code) {
  return encode_frame(task, FrameKind::Error,
                      Tensor(Shape{1}, std::vector<int8_t>{static_cast<int8_t>(code)}, QuantParams{1.0f, 0}));
}

uint8_t error_frame_code(const DecodedFrame& frame) {
  if (frame.kind != FrameKind::Error || frame.tensor.dtype() != DType::INT8 || frame.tensor.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, "not an error frame");
  }
  return static_cast<uint8_t>(frame.tensor.i8()[0]);
}

}  // namespace cascade
