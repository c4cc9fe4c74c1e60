#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ccseg/surt.hpp"

namespace ccseg {

/// Lines longer than this are treated as corrupt input.
inline constexpr std::size_t kMaxLineBytes = 1u << 20;

enum class Subset { Warc, CrawlDiagnostics, RobotsTxt };

std::string_view subset_name(Subset s) noexcept;

struct SegmentRef {
  int segment_id = 0;  // 0..99
  Subset subset = Subset::Warc;

  friend bool operator==(const SegmentRef&, const SegmentRef&) = default;
};

/// One primary-index line: "urlkey timestamp {metadata}".
struct IndexEntry {
  UrlKey urlkey;
  std::string timestamp14;
  std::string url;
  std::string mime = "unk";  // "unk" when the record carries no mime
  std::optional<std::string> mime_detected;
  int status = 0;
  std::string digest;
  std::uint64_t length = 0;
  std::uint64_t offset = 0;
  std::string filename;
  std::optional<std::string> charset;
  std::vector<std::string> languages;  // empty when absent, else 1..3 codes in rank order
  std::optional<std::string> redirect;

  /// Keys this parser does not model, kept verbatim and in source order.
  std::vector<std::pair<std::string, nlohmann::json>> extras;
  /// Metadata keys in the order they appeared; drives re-serialization.
  /// Empty for entries built in code, which then use the canonical order.
  std::vector<std::string> field_order;
};

/// Throws Error{MalformedLine} or Error{BadTimestamp}.
IndexEntry parse_index_line(std::string_view line);

/// Inverse of parse_index_line; metadata is written the way the index
/// generator writes it (", " and ": " separators, non-ASCII escaped).
std::string to_line(const IndexEntry& entry);

/// One cluster.idx line. The timestamp is optional because some master
/// files (and excerpts) carry only the bare urlkey.
struct MasterIndexLine {
  UrlKey first_urlkey;
  std::string timestamp14;  // empty when absent
  std::string shard_name;
  std::uint64_t block_offset = 0;
  std::uint64_t block_length = 0;
  std::optional<std::uint64_t> sequence;  // trailing block number, when present
};

/// Fields may be separated by any run of spaces or tabs.
MasterIndexLine parse_master_line(std::string_view line);

/// Fields joined by single spaces.
std::string to_line(const MasterIndexLine& line);

bool is_shard_name(std::string_view name) noexcept;

/// Leading urlkey of an index or master line (up to the first space or tab).
std::string_view urlkey_of_line(std::string_view line) noexcept;

/// Index of the first line whose urlkey sorts below its predecessor's.
std::optional<std::size_t> first_unsorted(std::span<const std::string> lines);
std::optional<std::size_t> first_unsorted(std::span<const MasterIndexLine> lines);

/// Segment number and subset from a record filename such as
/// "crawl-data/CC-MAIN-2021-25/segments/1623487610196.46/warc/...".
/// Throws Error{NoSegmentPath}.
SegmentRef segment_of(std::string_view filename);

}  // namespace ccseg
