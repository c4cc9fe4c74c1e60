#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <semaphore>
#include <string>

#include "ccseg/zipnum.hpp"

namespace ccseg {

/// Where an archive's index objects live.
struct ArchiveLocator {
  std::string base_url;    // e.g. https://data.commoncrawl.org
  std::string archive_id;  // CC-MAIN-YYYY-WW
  /// Object path below base_url; {archive} and {file} are substituted.
  std::string layout = "cc-index/collections/{archive}/indexes/{file}";

  /// Validates the archive id (week 1..53). Throws Error{InvalidArgument}.
  static ArchiveLocator make(std::string base_url, std::string archive_id);

  std::string object_path(std::string_view file) const;
};

bool is_archive_id(std::string_view id) noexcept;

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1000};
  std::chrono::milliseconds max_delay{60000};
  double jitter = 0.2;  // +-20%
};

/// Sleep before retry number `retry` (1 = first retry): initial_delay
/// doubled per retry, capped at max_delay, then scaled by a uniform factor
/// in [1-jitter, 1+jitter].
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, std::mt19937_64& rng);

struct FetchOptions {
  RetryPolicy retry;
  int max_connections = 4;
  std::chrono::milliseconds timeout{30000};
  /// Expected SHA-256 (hex) of cluster.idx, checked after download.
  std::optional<std::string> master_sha256;
};

/// HTTP range client for index objects. Safe to share between threads;
/// at most `max_connections` requests are in flight at once.
class RangeFetcher {
 public:
  RangeFetcher(ArchiveLocator locator, FetchOptions options = {});
  ~RangeFetcher();
  RangeFetcher(const RangeFetcher&) = delete;
  RangeFetcher& operator=(const RangeFetcher&) = delete;

  /// Exactly `length` bytes of `file` starting at `offset` via
  /// "Range: bytes=offset-(offset+length-1)". Throws HttpError with code
  /// HttpStatus, Timeout or TooManyRetries.
  std::string fetch_range(const std::string& file, std::uint64_t offset,
                          std::uint64_t length) const;

  /// cluster.idx in `cache_dir`/<archive>/, downloading it on a cache miss.
  /// Writes go to a temporary file renamed into place on success.
  std::filesystem::path fetch_master(const std::filesystem::path& cache_dir) const;

  const ArchiveLocator& locator() const noexcept { return locator_; }
  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  struct Gate;
  ArchiveLocator locator_;
  FetchOptions options_;
  std::unique_ptr<Gate> gate_;
  mutable std::atomic<std::size_t> requests_{0};
};

/// ShardAccess backed by remote range requests.
class HttpShardAccess final : public ShardAccess {
 public:
  explicit HttpShardAccess(const RangeFetcher& fetcher) : fetcher_(fetcher) {}
  std::string read_range(const std::string& shard_name, std::uint64_t offset,
                         std::uint64_t length) const override {
    return fetcher_.fetch_range(shard_name, offset, length);
  }

 private:
  const RangeFetcher& fetcher_;
};

/// Removes every cached archive below cache_dir; returns files removed.
std::uintmax_t clear_cache(const std::filesystem::path& cache_dir);

}  // namespace ccseg
