#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccseg {

/// Component lengths (in characters, delimiters excluded) and encoding
/// measures of one absolute URI. The fragment, if any, is stripped first.
struct UriMetrics {
  std::size_t total_len = 0;
  std::size_t scheme_len = 0;
  std::size_t netloc_len = 0;
  std::size_t path_len = 0;
  std::size_t query_len = 0;
  bool idna = false;                     // some host label starts with "xn--"
  std::optional<std::size_t> path_pct;   // valid %HH triplets; absent for an empty path
  std::optional<std::size_t> query_pct;  // absent for an empty query
  std::size_t stray_pct = 0;             // '%' not followed by two hex digits
  std::string host;                      // lowercased, for per-domain grouping
};

/// Throws Error{NotAbsolute} when there is no "scheme://" prefix.
UriMetrics measure(std::string_view uri);

struct YearMetric {
  int year = 0;
  UriMetrics metrics;
};

struct YearMeans {
  int year = 0;
  std::size_t n = 0;
  double total = 0, scheme = 0, netloc = 0, path = 0, query = 0;
  double idna_share = 0;
  double path_pct = 0;   // over URIs with a non-empty path
  double query_pct = 0;  // over URIs with a non-empty query
};

/// Arithmetic means per year, ascending; years before min_year are left out.
std::vector<YearMeans> aggregate_by_year(std::span<const YearMetric> samples, int min_year = 2000);

/// Drops every sample whose host has more than `min_samples` samples and a
/// mean query length above `min_mean_query`. Returns the dropped hosts.
std::vector<std::string> drop_outlier_domains(std::vector<YearMetric>& samples,
                                              std::size_t min_samples = 100,
                                              double min_mean_query = 100.0);

void write_tsv(std::span<const YearMeans> rows, std::ostream& out);

}  // namespace ccseg
