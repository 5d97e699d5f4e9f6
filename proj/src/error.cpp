#include "trussseg/error.hpp"

namespace trussseg {

std::string_view to_string(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonPositiveLeaf: return "NonPositiveLeaf";
    case ErrorCode::NonUnitDirection: return "NonUnitDirection";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedBody: return "TruncatedBody";
    case ErrorCode::MissingXyz: return "MissingXyz";
    case ErrorCode::MissingAttributes: return "MissingAttributes";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::RangeError: return "RangeError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
  : std::runtime_error(std::string(to_string(code)) + ": " + message)
  , code_(code)
{}

} // namespace trussseg
