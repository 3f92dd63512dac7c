// SPDX-License-Identifier: Apache-2.0
//
// Frame layout (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "CSC1"
//   4       1     version (1)
//   5       1     task    (1 = STT, 2 = TTS)
//   6       1     kind    (1 = features, 2 = hidden states, 3 = error)
//   7       1     dtype   (1 = FP32, 2 = INT8)
//   8       1     ndim    (<= 8)
//   9       3     reserved, zero
//   12      4*n   dims, u32 each
//   ..      5     INT8 only: scale f32, zero_point i8
//   ..      ..    payload, row-major scalars
//   end-4   4     crc32 (IEEE) of every preceding byte
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cascade/model.hpp"
#include "cascade/tensor.hpp"

namespace cascade {

inline constexpr uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 12;
inline constexpr std::size_t kMaxFrameDims = 8;

enum class FrameKind : uint8_t { Features = 1, HiddenStates = 2, Error = 3 };

// Error frame codes.
enum class ServiceError : uint8_t { Malformed = 1, Shape = 2, Version = 3, TooLarge = 4 };

struct DecodedFrame {
  Task task = Task::STT;
  FrameKind kind = FrameKind::Features;
  Tensor tensor;
};

/// 12 + 4*ndim + (5 if INT8) + payload + 4.
uint64_t predicted_frame_length(std::size_t ndim, DType dtype, uint64_t elements) noexcept;

std::vector<uint8_t> encode_frame(Task task, FrameKind kind, const Tensor& t);

/// Throws BadMagic, UnsupportedVersion, CrcMismatch, Truncated, UnknownEnum or
/// TooManyDims.
DecodedFrame decode_frame(std::span<const uint8_t> bytes);

/// A kind=3 frame: INT8 tensor of shape [1] holding the code byte.
std::vector<uint8_t> encode_error_frame(Task task, ServiceError code);

/// Code byte carried by a decoded error frame.
uint8_t error_frame_code(const DecodedFrame& frame);

uint32_t crc32_ieee(std::span<const uint8_t> bytes) noexcept;

}  // namespace cascade
