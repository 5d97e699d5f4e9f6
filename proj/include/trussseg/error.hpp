#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trussseg {

enum class ErrorCode {
  EmptyCloud,
  NonFinite,
  EmptySubset,
  NotSymmetric,
  TooFewPoints,
  NonPositiveLeaf,
  NonUnitDirection,
  InvalidSpec,
  InvalidBounds,
  DegenerateCloud,
  LengthMismatch,
  Empty,
  SingleClass,
  IoError,
  MalformedHeader,
  TruncatedBody,
  MissingXyz,
  MissingAttributes,
  UnknownKey,
  TypeError,
  RangeError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace trussseg
