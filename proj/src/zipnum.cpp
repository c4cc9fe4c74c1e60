#include "ccseg/zipnum.hpp"

#include <fstream>
#include <sstream>

#include "ccseg/error.hpp"
#include "ccseg/gzip.hpp"

namespace ccseg {

BlockHandle handle_of(const MasterIndexLine& line) {
  return BlockHandle{line.shard_name, line.block_offset, line.block_length};
}

std::string LocalShardAccess::read_range(const std::string& shard_name, std::uint64_t offset,
                                         std::uint64_t length) const {
  auto path = dir_ / shard_name;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::RangeUnavailable, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::uint64_t>(in.tellg());
  if (offset > size || length > size - offset)
    throw Error(Errc::RangeUnavailable, shard_name + ": range " + std::to_string(offset) + "+" +
                                            std::to_string(length) + " beyond " +
                                            std::to_string(size) + " bytes");
  std::string buf(length, '\0');
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(buf.data(), static_cast<std::streamsize>(length));
  if (static_cast<std::uint64_t>(in.gcount()) != length)
    throw Error(Errc::RangeUnavailable, "short read from " + path.string());
  return buf;
}

MasterIndex parse_master(std::string_view text) {
  MasterIndex master;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos)
      master.push_back(parse_master_line(line));
    pos = nl + 1;
  }
  return master;
}

MasterIndex load_master(const std::filesystem::path& cluster_idx) {
  std::ifstream in(cluster_idx, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + cluster_idx.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_master(ss.str());
}

std::optional<std::size_t> locate_block(std::span<const MasterIndexLine> master,
                                        const UrlKey& key, LookupCounters* counters) {
  if (master.empty()) throw Error(Errc::EmptyMaster, "master index has no lines");
  // upper_bound: first line whose key is > search key
  std::size_t lo = 0, hi = master.size();
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (counters) ++counters->master_comparisons;
    if (key < master[mid].first_urlkey) hi = mid;
    else lo = mid + 1;
  }
  if (lo == 0) return std::nullopt;
  return lo - 1;
}

std::vector<std::string> read_block(const BlockHandle& handle, const ShardAccess& shards) {
  std::string text = gunzip_member(shards.read_range(handle.shard_name, handle.offset, handle.length));
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::size_t end = nl;
    if (end > pos && text[end - 1] == '\r') --end;
    lines.emplace_back(text, pos, end - pos);
    pos = nl + 1;
  }
  return lines;
}

namespace {

std::size_t first_not_below(const std::vector<std::string>& lines, std::string_view key,
                            LookupCounters* counters) {
  std::size_t lo = 0, hi = lines.size();
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (counters) ++counters->block_comparisons;
    if (urlkey_of_line(lines[mid]) < key) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

}  // namespace

std::vector<std::string> lookup_lines(const UrlKey& key, std::span<const MasterIndexLine> master,
                                      const ShardAccess& shards, LookupCounters* counters) {
  std::vector<std::string> out;
  auto located = locate_block(master, key, counters);
  if (!located) return out;

  auto lines = read_block(handle_of(master[*located]), shards);
  if (counters) ++counters->blocks_read;
  // The located block is the last one starting at or before the key, so a
  // run of equal keys cannot continue past it; earlier blocks are not read.
  for (std::size_t i = first_not_below(lines, key.str(), counters);
       i < lines.size() && urlkey_of_line(lines[i]) == key.str(); ++i)
    out.push_back(lines[i]);
  return out;
}

std::vector<IndexEntry> lookup(const UrlKey& key, std::span<const MasterIndexLine> master,
                               const ShardAccess& shards, LookupCounters* counters) {
  std::vector<IndexEntry> entries;
  for (const auto& line : lookup_lines(key, master, shards, counters))
    entries.push_back(parse_index_line(line));
  return entries;
}

void for_each_block(std::span<const MasterIndexLine> master, const ShardAccess& shards,
                    const std::function<void(std::size_t, std::vector<std::string>&)>& fn) {
  for (std::size_t i = 0; i < master.size(); ++i) {
    auto lines = read_block(handle_of(master[i]), shards);
    fn(i, lines);
  }
}

}  // namespace ccseg
