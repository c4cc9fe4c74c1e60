#include "ccseg/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>

#include "ccseg/error.hpp"

namespace ccseg {

std::string_view feature_name(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::MimePair: return "mime_pair";
    case FeatureKind::LanguageFirst: return "language_first";
    case FeatureKind::LengthPercentile: return "length_percentile";
    case FeatureKind::LmhYear: return "lmh_year";
  }
  return "mime_pair";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view name) noexcept {
  for (auto k : {FeatureKind::MimePair, FeatureKind::LanguageFirst, FeatureKind::LengthPercentile,
                 FeatureKind::LmhYear})
    if (feature_name(k) == name) return k;
  return std::nullopt;
}

std::string mime_pair_label(const IndexEntry& e) {
  std::string label = e.mime;
  label.push_back(' ');
  if (!e.mime_detected) {
    label += kNoDetected;
  } else if (*e.mime_detected == e.mime) {
    label += kDitto;
  } else if (*e.mime_detected == kDitto || *e.mime_detected == kNoDetected ||
             e.mime_detected->starts_with('=')) {
    label += '=' + *e.mime_detected;
  } else {
    label += *e.mime_detected;
  }
  return label;
}

Tabulation::Tabulation(FeatureSpec spec, int n_segments) : spec_(spec) {
  if (spec.top_k == 0) throw Error(Errc::InvalidArgument, "top_k must be at least 1");
  if (n_segments < 1 || n_segments > 100)
    throw Error(Errc::InvalidArgument, "segment count must be in 1..100");
  counts_.resize(static_cast<std::size_t>(n_segments));
  lengths_.resize(static_cast<std::size_t>(n_segments));
}

void Tabulation::add(const IndexEntry& entry) { add(entry, segment_of(entry.filename)); }

void Tabulation::add(const IndexEntry& entry, const SegmentRef& segment) {
  if (segment.subset != Subset::Warc)
    throw Error(Errc::WrongSubset, "entry for " + entry.url + " is in " +
                                       std::string(subset_name(segment.subset)));
  if (segment.segment_id < 0 || segment.segment_id >= n_segments())
    throw Error(Errc::InvalidArgument, "segment " + std::to_string(segment.segment_id) +
                                           " outside the tabulated range");
  auto seg = static_cast<std::size_t>(segment.segment_id);
  switch (spec_.kind) {
    case FeatureKind::MimePair:
      ++counts_[seg][mime_pair_label(entry)];
      break;
    case FeatureKind::LanguageFirst:
      if (!entry.languages.empty()) ++counts_[seg][entry.languages.front()];
      break;
    case FeatureKind::LengthPercentile:
      lengths_[seg].push_back(entry.length);
      break;
    case FeatureKind::LmhYear:
      throw Error(Errc::InvalidArgument, "lmh_year tabulates Last-Modified records");
  }
}

void Tabulation::add(const LastModRecord& record) {
  if (spec_.kind != FeatureKind::LmhYear)
    throw Error(Errc::InvalidArgument, "Last-Modified records only feed lmh_year");
  std::string year = std::to_string(utc_year(record.lm_posix));
  if (!record.segment) {
    ++unsegmented_[year];
    return;
  }
  if (record.segment->subset != Subset::Warc)
    throw Error(Errc::WrongSubset, "Last-Modified record outside the warc subset");
  auto seg = record.segment->segment_id;
  if (seg < 0 || seg >= n_segments())
    throw Error(Errc::InvalidArgument, "segment outside the tabulated range");
  ++counts_[static_cast<std::size_t>(seg)][year];
}

void Tabulation::merge(const Tabulation& other) {
  if (other.spec_.kind != spec_.kind || other.counts_.size() != counts_.size())
    throw Error(Errc::InvalidArgument, "cannot merge tabulations of different shape");
  for (std::size_t s = 0; s < counts_.size(); ++s) {
    for (const auto& [label, n] : other.counts_[s]) counts_[s][label] += n;
    lengths_[s].insert(lengths_[s].end(), other.lengths_[s].begin(), other.lengths_[s].end());
  }
  for (const auto& [label, n] : other.unsegmented_) unsegmented_[label] += n;
}

std::map<std::string, std::uint64_t> Tabulation::whole_counts() const {
  std::map<std::string, std::uint64_t> whole = unsegmented_;
  for (const auto& seg : counts_)
    for (const auto& [label, n] : seg) whole[label] += n;
  return whole;
}

std::vector<std::uint64_t> percentile_vector(std::span<const std::uint64_t> lengths) {
  if (lengths.empty()) throw Error(Errc::EmptyInput, "percentiles of an empty multiset");
  std::vector<std::uint64_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<std::uint64_t> out(100);
  for (std::size_t p = 1; p <= 100; ++p) {
    std::size_t rank = (p * n + 99) / 100;  // ceil(p*n/100), >= 1
    out[p - 1] = sorted[rank - 1];
  }
  return out;
}

std::size_t MergedFeatureTable::missing_cells() const noexcept {
  std::size_t n = 0;
  for (const auto& row : cells)
    n += static_cast<std::size_t>(std::count(row.begin(), row.end(), std::nullopt));
  return n;
}

MergedFeatureTable merge_top_k(const std::map<std::string, std::uint64_t>& whole,
                               std::span<const std::map<std::string, std::uint64_t>> segments,
                               std::size_t top_k) {
  std::vector<std::pair<std::string, std::uint64_t>> ranked(whole.begin(), whole.end());
  // map order is lexicographic, so a stable sort on count keeps ties lexicographic
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);

  MergedFeatureTable t;
  for (std::size_t s = 0; s < segments.size(); ++s) t.segment_ids.push_back(static_cast<int>(s));
  for (auto& [label, count] : ranked) {
    std::vector<std::optional<std::uint64_t>> row;
    row.reserve(segments.size());
    for (const auto& seg : segments) {
      auto it = seg.find(label);
      row.push_back(it == seg.end() ? std::nullopt : std::optional<std::uint64_t>(it->second));
    }
    t.labels.push_back(label);
    t.whole.push_back(count);
    t.cells.push_back(std::move(row));
  }
  return t;
}

MergedFeatureTable build_table(const Tabulation& tab) {
  // segments with no records at all are not part of the archive
  std::vector<int> present;
  for (int s = 0; s < tab.n_segments(); ++s) {
    bool empty = tab.spec().kind == FeatureKind::LengthPercentile ? tab.segment_lengths(s).empty()
                                                                  : tab.segment_counts(s).empty();
    if (!empty) present.push_back(s);
  }

  if (tab.spec().kind != FeatureKind::LengthPercentile) {
    std::vector<std::map<std::string, std::uint64_t>> segs;
    segs.reserve(present.size());
    for (int s : present) segs.push_back(tab.segment_counts(s));
    auto t = merge_top_k(tab.whole_counts(), segs, tab.spec().top_k);
    t.segment_ids = present;
    return t;
  }

  std::vector<std::uint64_t> all;
  for (int s : present) all.insert(all.end(), tab.segment_lengths(s).begin(), tab.segment_lengths(s).end());
  MergedFeatureTable t;
  t.whole = percentile_vector(all);
  t.segment_ids = present;
  std::vector<std::vector<std::uint64_t>> per_seg;
  for (int s : present) per_seg.push_back(percentile_vector(tab.segment_lengths(s)));
  for (std::size_t p = 0; p < 100; ++p) {
    t.labels.push_back("p" + std::to_string(p + 1));
    std::vector<std::optional<std::uint64_t>> row;
    for (const auto& v : per_seg) row.push_back(v[p]);
    t.cells.push_back(std::move(row));
  }
  return t;
}

std::string segment_column_name(int segment_id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "seg%02d", segment_id);
  return buf;
}

void write_tsv(const MergedFeatureTable& t, std::ostream& out) {
  out << "label\twhole";
  for (int id : t.segment_ids) out << '\t' << segment_column_name(id);
  out << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out << t.labels[r] << '\t' << t.whole[r];
    for (const auto& cell : t.cells[r]) {
      out << '\t';
      if (cell) out << *cell;
      else out << "nan";
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      f.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return f;
}

std::uint64_t parse_count(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw Error(Errc::MalformedLine, "bad count '" + std::string(s) + "'");
  return v;
}

}  // namespace

MergedFeatureTable read_tsv(std::istream& in) {
  MergedFeatureTable t;
  std::string line;
  bool have_header = false;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto f = split_tabs(line);
    if (!have_header) {
      if (f.size() < 2 || f[0] != "label" || f[1] != "whole")
        throw Error(Errc::MalformedLine, "table header must start with label, whole");
      for (std::size_t i = 2; i < f.size(); ++i) {
        if (f[i].size() < 4 || !f[i].starts_with("seg"))
          throw Error(Errc::MalformedLine, "bad segment column '" + std::string(f[i]) + "'");
        t.segment_ids.push_back(static_cast<int>(parse_count(f[i].substr(3))));
      }
      columns = f.size();
      have_header = true;
      continue;
    }
    if (f.size() != columns) throw Error(Errc::MalformedLine, "row width differs from header");
    t.labels.emplace_back(f[0]);
    t.whole.push_back(parse_count(f[1]));
    std::vector<std::optional<std::uint64_t>> row;
    for (std::size_t i = 2; i < f.size(); ++i)
      row.push_back(f[i] == "nan" ? std::nullopt : std::optional(parse_count(f[i])));
    t.cells.push_back(std::move(row));
  }
  if (!have_header) throw Error(Errc::MalformedLine, "table has no header");
  return t;
}

}  // namespace ccseg
