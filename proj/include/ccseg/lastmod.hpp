#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccseg/cdx.hpp"

namespace ccseg {

/// Lenient HTTP-date parser. Accepts IMF-fixdate, RFC 850 and asctime
/// forms plus common deviations: a missing, trailing or misplaced "GMT",
/// "UTC"/"UT"/"Z", RFC 822 US zones, numeric +-hhmm offsets, single-digit
/// days and two-digit years (70-99 -> 19xx, 00-69 -> 20xx). A date with no
/// zone is taken as UTC. Returns nullopt when unusable as written.
std::optional<std::int64_t> parse_http_date(std::string_view s);

/// IMF-fixdate, e.g. "Sun, 06 Nov 1994 08:49:37 GMT".
std::string format_http_date(std::int64_t posix);

/// Window of believable Last-Modified values relative to the crawl time.
struct CredibilityWindow {
  std::int64_t floor = 631152000;  // 1990-01-01T00:00:00Z
  std::int64_t max_ahead = 90000;  // 25 hours past the crawl instant
};

enum class Credibility { Accepted, TooEarly, InFuture };

Credibility credibility_filter(std::int64_t lm_posix, std::int64_t crawl_posix,
                               const CredibilityWindow& window = {});

/// UTC seconds of a 14-digit crawl timestamp. Throws Error{BadTimestamp}.
std::int64_t crawl_posix_of(std::string_view timestamp14);

struct LastModRecord {
  std::int64_t lm_posix = 0;
  std::int64_t crawl_posix = 0;
  std::optional<SegmentRef> segment;
  std::string url_ref;
  std::string raw_header;
};

struct ParseStats {
  std::uint64_t total = 0;
  std::uint64_t absent = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected_unusable = 0;
  std::uint64_t rejected_incredible = 0;

  ParseStats& operator+=(const ParseStats& o);
};

/// One row of an extraction file: urlkey, timestamp14, raw Last-Modified
/// value ("" or "-" when absent), url, and optionally the record filename.
struct ExtractionRow {
  std::string urlkey;
  std::string timestamp14;
  std::string raw_header;
  std::string url;
  std::string filename;
};

ExtractionRow parse_extraction_row(std::string_view line);
std::string to_line(const ExtractionRow& row);

/// Parses and filters one extraction row, updating stats. Returns the
/// record when its Last-Modified value is present, usable and credible.
std::optional<LastModRecord> accept_row(const ExtractionRow& row, ParseStats& stats,
                                        const CredibilityWindow& window = {});

enum class Granularity { Year, Month, Day };

/// Counts per UTC calendar period ("2005", "2005-04", "2005-04-24"), in
/// chronological order; empty periods are omitted.
std::vector<std::pair<std::string, std::uint64_t>> tabulate_period(
    std::span<const LastModRecord> records, Granularity granularity);

int utc_year(std::int64_t posix) noexcept;

struct OffsetHistogram {
  std::map<std::int64_t, std::uint64_t> counts;  // lm - crawl -> records
  std::uint64_t total = 0;

  /// Most frequent offsets (ties: smaller offset first).
  std::vector<std::pair<std::int64_t, std::uint64_t>> top(std::size_t n) const;
  /// Share of all records covered by top(n).
  double coverage(std::size_t n) const;
};

OffsetHistogram offsets(std::span<const LastModRecord> records);

struct AnomalyThresholds {
  double ratio = 10.0;
  double share = 0.9;
  std::size_t ranks_per_year = 10;  // top buckets examined in each year
};

struct AnomalyReport {
  std::int64_t bucket_id = 0;  // floor(lm_posix / 10000)
  int year = 0;
  std::size_t rank = 0;  // 1 = busiest bucket of its year
  std::uint64_t bucket_count = 0;
  std::int64_t dominant_value = 0;
  std::uint64_t dominant_count = 0;
  double dominant_share = 0.0;
  /// count / count of the next bucket in the same year (nullopt: none)
  std::optional<double> runner_up_ratio;
  /// count / count of the same-ranked bucket in year-1 and year+1
  std::optional<double> prev_year_ratio;
  std::optional<double> next_year_ratio;
};

inline constexpr std::int64_t kAnomalyBucketSeconds = 10000;

/// Buckets values into 10000-second intervals and flags a bucket when it
/// outnumbers the same-ranked bucket of each adjacent year by more than
/// `ratio` (or, with no comparable adjacent year, its same-year runner-up)
/// and one exact value makes up at least `share` of it.
std::vector<AnomalyReport> detect_anomalies(std::span<const LastModRecord> records,
                                            const AnomalyThresholds& thresholds = {});

/// Drops every record whose Last-Modified equals `lm_posix`; returns the
/// number removed.
std::size_t remove_value(std::vector<LastModRecord>& records, std::int64_t lm_posix);

}  // namespace ccseg
