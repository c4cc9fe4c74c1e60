#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccseg/cdx.hpp"

namespace ccseg {

struct BlockHandle {
  std::string shard_name;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

BlockHandle handle_of(const MasterIndexLine& line);

/// Byte-range reader over shard objects. Implementations must tolerate
/// concurrent calls.
class ShardAccess {
 public:
  virtual ~ShardAccess() = default;
  /// Exactly `length` bytes at `offset`, or Error{RangeUnavailable}.
  virtual std::string read_range(const std::string& shard_name, std::uint64_t offset,
                                 std::uint64_t length) const = 0;
};

/// Shards stored as plain files in one directory.
class LocalShardAccess final : public ShardAccess {
 public:
  explicit LocalShardAccess(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string read_range(const std::string& shard_name, std::uint64_t offset,
                         std::uint64_t length) const override;

 private:
  std::filesystem::path dir_;
};

/// Instrumentation for the complexity guarantees of a lookup.
struct LookupCounters {
  std::size_t master_comparisons = 0;
  std::size_t block_comparisons = 0;
  std::size_t blocks_read = 0;
};

using MasterIndex = std::vector<MasterIndexLine>;

MasterIndex load_master(const std::filesystem::path& cluster_idx);
MasterIndex parse_master(std::string_view text);

/// Index of the last master line whose first urlkey is <= key; nullopt
/// ("not before") when key sorts ahead of every block. Throws
/// Error{EmptyMaster}.
std::optional<std::size_t> locate_block(std::span<const MasterIndexLine> master,
                                        const UrlKey& key, LookupCounters* counters = nullptr);

/// Fetches and inflates one block, split into lines (no terminators).
std::vector<std::string> read_block(const BlockHandle& handle, const ShardAccess& shards);

/// Raw index lines whose urlkey equals key, in file order. Exactly one
/// block is read; a run that begins in an earlier block is only partly
/// returned, so writers should keep equal keys inside one block.
std::vector<std::string> lookup_lines(const UrlKey& key, std::span<const MasterIndexLine> master,
                                      const ShardAccess& shards,
                                      LookupCounters* counters = nullptr);

std::vector<IndexEntry> lookup(const UrlKey& key, std::span<const MasterIndexLine> master,
                               const ShardAccess& shards, LookupCounters* counters = nullptr);

/// Visits every block in master order; `fn` receives the master position
/// and the block's lines.
void for_each_block(std::span<const MasterIndexLine> master, const ShardAccess& shards,
                    const std::function<void(std::size_t, std::vector<std::string>&)>& fn);

}  // namespace ccseg
