#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccseg {

enum class Errc {
  // surt
  MissingScheme,
  EmptyAuthority,
  // cdx
  MalformedLine,
  BadTimestamp,
  NoSegmentPath,
  // zipnum
  EmptyMaster,
  BadGzipMember,
  RangeUnavailable,
  // fetch
  HttpStatus,
  Timeout,
  TooManyRetries,
  ChecksumMismatch,
  // features / stats
  WrongSubset,
  EmptyInput,
  TooFewPairs,
  TooFew,
  InvalidArgument,
  // urimetrics
  NotAbsolute,
  // synth
  InvalidSpec,
  // io
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// HTTP failures keep the status code around (0 when no response arrived).
class HttpError : public Error {
 public:
  HttpError(Errc code, int status, const std::string& what)
      : Error(code, what), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace ccseg
