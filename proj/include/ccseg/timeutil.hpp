#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ccseg {

struct CivilTime {
  int year = 1970;
  unsigned month = 1;  // 1..12
  unsigned day = 1;    // 1..31
  unsigned hour = 0;
  unsigned minute = 0;
  unsigned second = 0;
};

bool is_valid_civil(const CivilTime& t) noexcept;

/// Seconds since the epoch for a UTC calendar instant. Caller validates.
std::int64_t to_posix(const CivilTime& t) noexcept;

CivilTime from_posix(std::int64_t posix) noexcept;

/// Parses YYYYMMDDHHMMSS (UTC). Throws Error{BadTimestamp}.
std::int64_t parse_timestamp14(std::string_view ts);

bool is_timestamp14(std::string_view ts) noexcept;

std::string format_timestamp14(std::int64_t posix);

}  // namespace ccseg
