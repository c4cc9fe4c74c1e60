#include "ccseg/lastmod.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "ccseg/error.hpp"
#include "ccseg/timeutil.hpp"

namespace ccseg {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"jan", "feb", "mar", "apr", "may", "jun",
                                                      "jul", "aug", "sep", "oct", "nov", "dec"};
constexpr std::array<std::string_view, 7> kDays = {"sun", "mon", "tue", "wed", "thu", "fri", "sat"};
constexpr std::array<std::string_view, 7> kDaysLong = {"sunday",   "monday", "tuesday", "wednesday",
                                                       "thursday", "friday", "saturday"};
constexpr std::array<std::string_view, 12> kMonthsLong = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::optional<int> month_of(std::string_view lc) {
  for (std::size_t i = 0; i < 12; ++i)
    if (lc == kMonths[i] || lc == kMonthsLong[i]) return static_cast<int>(i) + 1;
  return std::nullopt;
}

bool is_weekday(std::string_view lc) {
  for (std::size_t i = 0; i < 7; ++i)
    if (lc == kDays[i] || lc == kDaysLong[i]) return true;
  return false;
}

// Offset east of UTC in seconds.
std::optional<int> named_zone(std::string_view lc) {
  if (lc == "gmt" || lc == "utc" || lc == "ut" || lc == "z") return 0;
  if (lc == "edt") return -4 * 3600;
  if (lc == "est" || lc == "cdt") return -5 * 3600;
  if (lc == "cst" || lc == "mdt") return -6 * 3600;
  if (lc == "mst" || lc == "pdt") return -7 * 3600;
  if (lc == "pst") return -8 * 3600;
  return std::nullopt;
}

std::optional<int> numeric_zone(std::string_view s) {
  if (s.size() < 3 || (s[0] != '+' && s[0] != '-')) return std::nullopt;
  std::string digits;
  for (char c : s.substr(1))
    if (c != ':') digits.push_back(c);
  if (!all_digits(digits) || (digits.size() != 4 && digits.size() != 2)) return std::nullopt;
  int hh = to_int(std::string_view(digits).substr(0, 2));
  int mm = digits.size() == 4 ? to_int(std::string_view(digits).substr(2, 2)) : 0;
  if (hh > 14 || mm > 59) return std::nullopt;
  int off = hh * 3600 + mm * 60;
  return s[0] == '-' ? -off : off;
}

struct HMS {
  unsigned h, m, s;
};

std::optional<HMS> time_of(std::string_view t) {
  std::array<std::string_view, 3> parts{};
  std::size_t n = 0, start = 0;
  for (std::size_t i = 0; i <= t.size(); ++i) {
    if (i == t.size() || t[i] == ':') {
      if (n == 3) return std::nullopt;
      parts[n++] = t.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n < 2) return std::nullopt;
  for (std::size_t i = 0; i < n; ++i)
    if (!all_digits(parts[i]) || parts[i].size() > 2) return std::nullopt;
  HMS hms{static_cast<unsigned>(to_int(parts[0])), static_cast<unsigned>(to_int(parts[1])),
          n == 3 ? static_cast<unsigned>(to_int(parts[2])) : 0u};
  if (hms.h > 23 || hms.m > 59 || hms.s > 59) return std::nullopt;
  return hms;
}

std::vector<std::string_view> tokenize(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != ',') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::optional<std::int64_t> parse_http_date(std::string_view s) {
  std::vector<std::string_view> raw = tokenize(s);
  std::vector<std::string_view> tokens;
  for (auto tok : raw) {
    // "06-Nov-94" (RFC 850) splits on '-', but "-0400" is a zone.
    bool has_alpha = std::any_of(tok.begin(), tok.end(),
                                 [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
    if (tok.find('-') != std::string_view::npos && tok[0] != '-' && has_alpha &&
        tok.find(':') == std::string_view::npos) {
      std::size_t start = 0;
      for (std::size_t i = 0; i <= tok.size(); ++i) {
        if (i == tok.size() || tok[i] == '-') {
          if (i > start) tokens.push_back(tok.substr(start, i - start));
          start = i + 1;
        }
      }
      continue;
    }
    // "08:49:37GMT" or "GMT+0200": peel a zone name off either side.
    if (tok.find(':') != std::string_view::npos && has_alpha) {
      std::size_t k = tok.size();
      while (k > 0 && std::isalpha(static_cast<unsigned char>(tok[k - 1]))) --k;
      tokens.push_back(tok.substr(0, k));
      tokens.push_back(tok.substr(k));
      continue;
    }
    if (tok.size() > 3 && (tok[3] == '+' || tok[3] == '-') && named_zone(lower(tok.substr(0, 3)))) {
      tokens.push_back(tok.substr(0, 3));
      tokens.push_back(tok.substr(3));
      continue;
    }
    tokens.push_back(tok);
  }

  std::optional<int> month, named, numeric;
  std::optional<HMS> hms;
  std::vector<std::string_view> numbers;
  int weekdays = 0;
  for (auto tok : tokens) {
    std::string lc = lower(tok);
    if (auto m = month_of(lc)) {
      if (month) return std::nullopt;
      month = m;
    } else if (is_weekday(lc)) {
      if (++weekdays > 1) return std::nullopt;
    } else if (auto z = named_zone(lc)) {
      if (named) return std::nullopt;
      named = z;
    } else if (auto nz = numeric_zone(tok)) {
      if (numeric) return std::nullopt;
      numeric = nz;
    } else if (tok.find(':') != std::string_view::npos) {
      if (hms) return std::nullopt;
      hms = time_of(tok);
      if (!hms) return std::nullopt;
    } else if (all_digits(tok)) {
      numbers.push_back(tok);
    } else {
      return std::nullopt;
    }
  }
  if (!month || !hms || numbers.size() != 2) return std::nullopt;

  std::string_view day_tok = numbers[0], year_tok = numbers[1];
  if (numbers[0].size() == 4 && numbers[1].size() <= 2) std::swap(day_tok, year_tok);
  if (day_tok.size() > 2 || (year_tok.size() != 2 && year_tok.size() != 4)) return std::nullopt;

  int year = to_int(year_tok);
  if (year_tok.size() == 2) year += year >= 70 ? 1900 : 2000;

  CivilTime t;
  t.year = year;
  t.month = static_cast<unsigned>(*month);
  t.day = static_cast<unsigned>(to_int(day_tok));
  t.hour = hms->h;
  t.minute = hms->m;
  t.second = hms->s;
  if (!is_valid_civil(t)) return std::nullopt;

  // A named zone and a numeric offset together ("GMT+0200"): the offset wins.
  int zone = numeric ? *numeric : named.value_or(0);
  return to_posix(t) - zone;
}

std::string format_http_date(std::int64_t posix) {
  static constexpr const char* kDayNames[] = {"Thu", "Fri", "Sat", "Sun", "Mon", "Tue", "Wed"};
  static constexpr const char* kMonthNames[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  CivilTime t = from_posix(posix);
  std::int64_t days = posix >= 0 ? posix / 86400 : (posix - 86399) / 86400;
  int wd = static_cast<int>(((days % 7) + 7) % 7);  // 1970-01-01 was a Thursday
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s, %02u %s %04d %02u:%02u:%02u GMT", kDayNames[wd], t.day,
                kMonthNames[t.month - 1], t.year, t.hour, t.minute, t.second);
  return buf;
}

Credibility credibility_filter(std::int64_t lm_posix, std::int64_t crawl_posix,
                               const CredibilityWindow& window) {
  if (lm_posix < window.floor) return Credibility::TooEarly;
  if (lm_posix > crawl_posix + window.max_ahead) return Credibility::InFuture;
  return Credibility::Accepted;
}

std::int64_t crawl_posix_of(std::string_view timestamp14) { return parse_timestamp14(timestamp14); }

ParseStats& ParseStats::operator+=(const ParseStats& o) {
  total += o.total;
  absent += o.absent;
  accepted += o.accepted;
  rejected_unusable += o.rejected_unusable;
  rejected_incredible += o.rejected_incredible;
  return *this;
}

ExtractionRow parse_extraction_row(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> f;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      f.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  if (f.size() != 4 && f.size() != 5)
    throw Error(Errc::MalformedLine, "extraction row needs 4 or 5 tab-separated fields");
  ExtractionRow row{std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3]),
                    f.size() == 5 ? std::string(f[4]) : std::string()};
  return row;
}

std::string to_line(const ExtractionRow& row) {
  std::string out = row.urlkey + '\t' + row.timestamp14 + '\t' + row.raw_header + '\t' + row.url;
  if (!row.filename.empty()) out += '\t' + row.filename;
  return out;
}

std::optional<LastModRecord> accept_row(const ExtractionRow& row, ParseStats& stats,
                                        const CredibilityWindow& window) {
  ++stats.total;
  if (row.raw_header.empty() || row.raw_header == "-") {
    ++stats.absent;
    return std::nullopt;
  }
  auto lm = parse_http_date(row.raw_header);
  if (!lm) {
    ++stats.rejected_unusable;
    return std::nullopt;
  }
  std::int64_t crawl = crawl_posix_of(row.timestamp14);
  if (credibility_filter(*lm, crawl, window) != Credibility::Accepted) {
    ++stats.rejected_incredible;
    return std::nullopt;
  }
  ++stats.accepted;
  LastModRecord rec;
  rec.lm_posix = *lm;
  rec.crawl_posix = crawl;
  rec.url_ref = row.url;
  rec.raw_header = row.raw_header;
  if (!row.filename.empty()) {
    try {
      rec.segment = segment_of(row.filename);
    } catch (const Error&) {
    }
  }
  return rec;
}

int utc_year(std::int64_t posix) noexcept { return from_posix(posix).year; }

std::vector<std::pair<std::string, std::uint64_t>> tabulate_period(
    std::span<const LastModRecord> records, Granularity granularity) {
  std::map<std::string, std::uint64_t> counts;
  char buf[32];
  for (const auto& r : records) {
    CivilTime t = from_posix(r.lm_posix);
    switch (granularity) {
      case Granularity::Year: std::snprintf(buf, sizeof buf, "%04d", t.year); break;
      case Granularity::Month: std::snprintf(buf, sizeof buf, "%04d-%02u", t.year, t.month); break;
      case Granularity::Day:
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", t.year, t.month, t.day);
        break;
    }
    ++counts[buf];
  }
  return {counts.begin(), counts.end()};
}

std::vector<std::pair<std::int64_t, std::uint64_t>> OffsetHistogram::top(std::size_t n) const {
  std::vector<std::pair<std::int64_t, std::uint64_t>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (v.size() > n) v.resize(n);
  return v;
}

double OffsetHistogram::coverage(std::size_t n) const {
  if (total == 0) return 0.0;
  std::uint64_t covered = 0;
  for (const auto& [off, c] : top(n)) covered += c;
  return static_cast<double>(covered) / static_cast<double>(total);
}

OffsetHistogram offsets(std::span<const LastModRecord> records) {
  OffsetHistogram h;
  for (const auto& r : records) ++h.counts[r.lm_posix - r.crawl_posix];
  h.total = records.size();
  return h;
}

namespace {

struct Bucket {
  std::int64_t id = 0;
  std::uint64_t count = 0;
  std::int64_t mode = 0;
  std::uint64_t mode_count = 0;
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && a < 0) ? q - 1 : q;
}

}  // namespace

std::vector<AnomalyReport> detect_anomalies(std::span<const LastModRecord> records,
                                            const AnomalyThresholds& thresholds) {
  std::vector<std::int64_t> values;
  values.reserve(records.size());
  for (const auto& r : records) values.push_back(r.lm_posix);
  std::sort(values.begin(), values.end());

  // year -> buckets, busiest first
  std::map<int, std::vector<Bucket>> by_year;
  for (std::size_t i = 0; i < values.size();) {
    Bucket b;
    b.id = floor_div(values[i], kAnomalyBucketSeconds);
    while (i < values.size() && floor_div(values[i], kAnomalyBucketSeconds) == b.id) {
      std::size_t j = i;
      while (j < values.size() && values[j] == values[i]) ++j;
      std::uint64_t run = j - i;
      if (run > b.mode_count) {
        b.mode_count = run;
        b.mode = values[i];
      }
      b.count += run;
      i = j;
    }
    by_year[utc_year(b.id * kAnomalyBucketSeconds)].push_back(b);
  }
  for (auto& [year, buckets] : by_year)
    std::stable_sort(buckets.begin(), buckets.end(),
                     [](const Bucket& a, const Bucket& b) { return a.count > b.count; });

  auto same_rank = [&](int year, std::size_t idx) -> std::optional<std::uint64_t> {
    auto it = by_year.find(year);
    if (it == by_year.end() || idx >= it->second.size()) return std::nullopt;
    return it->second[idx].count;
  };

  std::vector<AnomalyReport> reports;
  for (const auto& [year, buckets] : by_year) {
    std::size_t limit = std::min(buckets.size(), thresholds.ranks_per_year);
    for (std::size_t idx = 0; idx < limit; ++idx) {
      const Bucket& b = buckets[idx];
      auto c = static_cast<double>(b.count);
      AnomalyReport rep;
      rep.bucket_id = b.id;
      rep.year = year;
      rep.rank = idx + 1;
      rep.bucket_count = b.count;
      rep.dominant_value = b.mode;
      rep.dominant_count = b.mode_count;
      rep.dominant_share = c > 0 ? static_cast<double>(b.mode_count) / c : 0.0;
      if (idx + 1 < buckets.size()) rep.runner_up_ratio = c / static_cast<double>(buckets[idx + 1].count);
      if (auto p = same_rank(year - 1, idx)) rep.prev_year_ratio = c / static_cast<double>(*p);
      if (auto n = same_rank(year + 1, idx)) rep.next_year_ratio = c / static_cast<double>(*n);

      bool outlier = false;
      if (rep.prev_year_ratio || rep.next_year_ratio) {
        outlier = (!rep.prev_year_ratio || *rep.prev_year_ratio > thresholds.ratio) &&
                  (!rep.next_year_ratio || *rep.next_year_ratio > thresholds.ratio);
      } else if (rep.runner_up_ratio) {
        outlier = *rep.runner_up_ratio > thresholds.ratio;
      }
      if (outlier && rep.dominant_share >= thresholds.share) reports.push_back(rep);
    }
  }
  return reports;
}

std::size_t remove_value(std::vector<LastModRecord>& records, std::int64_t lm_posix) {
  auto before = records.size();
  std::erase_if(records, [&](const LastModRecord& r) { return r.lm_posix == lm_posix; });
  return before - records.size();
}

}  // namespace ccseg
