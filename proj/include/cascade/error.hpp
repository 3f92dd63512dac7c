// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cascade {

enum class ErrorCode : int {
  InvalidArgument = 1,
  NonFinite,
  MissingQuantParams,
  InvalidConfig,
  InputTooLong,
  TokenOutOfRange,
  ShapeMismatch,
  AliasedFrequency,
  TooShort,
  EmptyReference,
  EmptySequence,
  TooManyDims,
  DimOverflow,
  BadMagic,
  UnsupportedVersion,
  CrcMismatch,
  Truncated,
  UnknownEnum,
  ConnectionFailed,
  HandlerError,
  BindFailed,
  NonPositiveClock,
  FileNotFound,
  ParseError,
  EmptyFleet,
  BadEdges,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by a link when the remote side answered with an error frame.
class HandlerError : public Error {
 public:
  HandlerError(uint8_t service_code, std::vector<uint8_t> frame)
      : Error(ErrorCode::HandlerError,
              "cloud service returned error frame (code " +
                  std::to_string(service_code) + ")"),
        service_code_(service_code),
        frame_(std::move(frame)) {}

  uint8_t service_code() const noexcept { return service_code_; }
  const std::vector<uint8_t>& frame() const noexcept { return frame_; }

 private:
  uint8_t service_code_;
  std::vector<uint8_t> frame_;
};

}  // namespace cascade
