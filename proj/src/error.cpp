#include "sct/error.hpp"

namespace sct {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RangeOverflow: return "RangeOverflow";
    case ErrorCode::InvalidVolume: return "InvalidVolume";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateIntensity: return "DegenerateIntensity";
    case ErrorCode::UnfittedParams: return "UnfittedParams";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OddExtent: return "OddExtent";
    case ErrorCode::ZeroWeight: return "ZeroWeight";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IndivisibleExtent: return "IndivisibleExtent";
    case ErrorCode::OutOfRangeEpoch: return "OutOfRangeEpoch";
    case ErrorCode::TooFewCases: return "TooFewCases";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::MissingPath: return "MissingPath";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace sct
