#include "ccseg/timeutil.hpp"

#include <chrono>
#include <cstdio>

#include "ccseg/error.hpp"

namespace ccseg {

namespace chr = std::chrono;

bool is_valid_civil(const CivilTime& t) noexcept {
  chr::year_month_day ymd{chr::year{t.year}, chr::month{t.month}, chr::day{t.day}};
  return ymd.ok() && t.hour < 24 && t.minute < 60 && t.second < 60;
}

std::int64_t to_posix(const CivilTime& t) noexcept {
  chr::sys_days days{chr::year{t.year} / chr::month{t.month} / chr::day{t.day}};
  return static_cast<std::int64_t>(days.time_since_epoch().count()) * 86400 +
         static_cast<std::int64_t>(t.hour) * 3600 + t.minute * 60 + t.second;
}

CivilTime from_posix(std::int64_t posix) noexcept {
  std::int64_t days = posix / 86400;
  std::int64_t rem = posix % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  CivilTime t;
  t.year = static_cast<int>(ymd.year());
  t.month = static_cast<unsigned>(ymd.month());
  t.day = static_cast<unsigned>(ymd.day());
  t.hour = static_cast<unsigned>(rem / 3600);
  t.minute = static_cast<unsigned>((rem % 3600) / 60);
  t.second = static_cast<unsigned>(rem % 60);
  return t;
}

bool is_timestamp14(std::string_view ts) noexcept {
  if (ts.size() != 14) return false;
  for (char c : ts)
    if (c < '0' || c > '9') return false;
  return true;
}

std::int64_t parse_timestamp14(std::string_view ts) {
  if (!is_timestamp14(ts))
    throw Error(Errc::BadTimestamp, "expected 14 digits, got '" + std::string(ts) + "'");
  auto num = [&](std::size_t pos, std::size_t len) {
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + static_cast<unsigned>(ts[i] - '0');
    return v;
  };
  CivilTime t;
  t.year = static_cast<int>(num(0, 4));
  t.month = num(4, 2);
  t.day = num(6, 2);
  t.hour = num(8, 2);
  t.minute = num(10, 2);
  t.second = num(12, 2);
  if (!is_valid_civil(t))
    throw Error(Errc::BadTimestamp, "not a calendar instant: '" + std::string(ts) + "'");
  return to_posix(t);
}

std::string format_timestamp14(std::int64_t posix) {
  CivilTime t = from_posix(posix);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u%02u%02u%02u", t.year, t.month, t.day, t.hour,
                t.minute, t.second);
  return buf;
}

}  // namespace ccseg
