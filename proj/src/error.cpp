#include "ccseg/error.hpp"

namespace ccseg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingScheme: return "MissingScheme";
    case Errc::EmptyAuthority: return "EmptyAuthority";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::BadTimestamp: return "BadTimestamp";
    case Errc::NoSegmentPath: return "NoSegmentPath";
    case Errc::EmptyMaster: return "EmptyMaster";
    case Errc::BadGzipMember: return "BadGzipMember";
    case Errc::RangeUnavailable: return "RangeUnavailable";
    case Errc::HttpStatus: return "HttpStatus";
    case Errc::Timeout: return "Timeout";
    case Errc::TooManyRetries: return "TooManyRetries";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::WrongSubset: return "WrongSubset";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::TooFew: return "TooFew";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NotAbsolute: return "NotAbsolute";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace ccseg
