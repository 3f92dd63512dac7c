// SPDX-License-Identifier: Apache-2.0
#include "cascade/error.hpp"

namespace cascade {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MissingQuantParams: return "MissingQuantParams";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InputTooLong: return "InputTooLong";
    case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AliasedFrequency: return "AliasedFrequency";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::TooManyDims: return "TooManyDims";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::UnknownEnum: return "UnknownEnum";
    case ErrorCode::ConnectionFailed: return "ConnectionFailed";
    case ErrorCode::HandlerError: return "HandlerError";
    case ErrorCode::BindFailed: return "BindFailed";
    case ErrorCode::NonPositiveClock: return "NonPositiveClock";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFleet: return "EmptyFleet";
    case ErrorCode::BadEdges: return "BadEdges";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cascade
