#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sct {

enum class ErrorCode {
  UnsupportedFormat,
  TruncatedData,
  MalformedHeader,
  RangeOverflow,
  InvalidVolume,
  DimMismatch,
  EmptyMask,
  DegenerateIntensity,
  UnfittedParams,
  InvalidArgument,
  ShapeMismatch,
  OddExtent,
  ZeroWeight,
  NotScalar,
  InvalidSpec,
  IndivisibleExtent,
  OutOfRangeEpoch,
  TooFewCases,
  OutOfRange,
  NonFiniteLoss,
  CorruptCheckpoint,
  TaskMismatch,
  DegenerateRange,
  UnknownKey,
  MissingPath,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every library failure is reported as an Error carrying a typed code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

} // namespace sct
