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
#include "ccseg/lastmod.hpp"

namespace ccseg {

enum class FeatureKind { MimePair, LanguageFirst, LengthPercentile, LmhYear };

std::string_view feature_name(FeatureKind kind) noexcept;
std::optional<FeatureKind> parse_feature_kind(std::string_view name) noexcept;

struct FeatureSpec {
  FeatureKind kind = FeatureKind::MimePair;
  std::size_t top_k = 100;
};

/// Marker standing in for a detected mime identical to the declared one.
inline constexpr std::string_view kDitto = "ditto";
/// Marker for a record without a detected mime.
inline constexpr std::string_view kNoDetected = "-";

/// "mime detected", with the detected part folded to kDitto when equal to
/// mime. A literal detected value spelled like a marker is prefixed with '='
/// so the markers stay distinct from real values.
std::string mime_pair_label(const IndexEntry& entry);

/// Per-segment tallies, built incrementally. For mime_pair, language_first
/// and lmh_year the tallies are label counts; for length_percentile the raw
/// lengths are kept until a table is requested.
class Tabulation {
 public:
  explicit Tabulation(FeatureSpec spec, int n_segments = 100);

  /// Only successful retrievals may be tabulated; throws Error{WrongSubset}
  /// for crawldiagnostics/robotstxt entries. Not used for lmh_year.
  void add(const IndexEntry& entry);
  void add(const IndexEntry& entry, const SegmentRef& segment);
  /// lmh_year only; records without a segment are counted in no segment.
  void add(const LastModRecord& record);

  /// Folds another tabulation of the same spec into this one.
  void merge(const Tabulation& other);

  const FeatureSpec& spec() const noexcept { return spec_; }
  int n_segments() const noexcept { return static_cast<int>(counts_.size()); }
  const std::map<std::string, std::uint64_t>& segment_counts(int segment) const {
    return counts_.at(static_cast<std::size_t>(segment));
  }
  const std::vector<std::uint64_t>& segment_lengths(int segment) const {
    return lengths_.at(static_cast<std::size_t>(segment));
  }
  /// Whole-archive counts: the union over segments.
  std::map<std::string, std::uint64_t> whole_counts() const;

 private:
  FeatureSpec spec_;
  std::vector<std::map<std::string, std::uint64_t>> counts_;
  std::vector<std::vector<std::uint64_t>> lengths_;
  std::map<std::string, std::uint64_t> unsegmented_;
};

/// Nearest-rank percentiles 1..100: element ceil(p*N/100) of the sorted
/// input. Throws Error{EmptyInput}.
std::vector<std::uint64_t> percentile_vector(std::span<const std::uint64_t> lengths);

/// Rows are features, columns are the whole archive plus one column per
/// segment. A missing cell (feature absent from a segment) is nullopt.
struct MergedFeatureTable {
  std::vector<std::string> labels;
  std::vector<int> segment_ids;
  std::vector<std::uint64_t> whole;
  std::vector<std::vector<std::optional<std::uint64_t>>> cells;  // [row][segment column]

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t missing_cells() const noexcept;
};

/// Top-k labels by whole-archive count (descending, ties by label) with the
/// count from every segment. `whole` may hold more than the segment union.
MergedFeatureTable merge_top_k(const std::map<std::string, std::uint64_t>& whole,
                               std::span<const std::map<std::string, std::uint64_t>> segments,
                               std::size_t top_k);

/// Builds the table for a finished tabulation: merge_top_k for count
/// features, percentile rows p1..p100 for length_percentile. Segments
/// without a single record get no column.
MergedFeatureTable build_table(const Tabulation& tab);

/// Tab-separated: "label  whole  segNN..." header, "nan" for missing cells.
/// Lines starting with '#' are comments and skipped on read.
void write_tsv(const MergedFeatureTable& table, std::ostream& out);
MergedFeatureTable read_tsv(std::istream& in);

std::string segment_column_name(int segment_id);

}  // namespace ccseg
