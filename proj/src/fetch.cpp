#include "ccseg/fetch.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "ccseg/digest.hpp"
#include "ccseg/error.hpp"

namespace ccseg {

namespace fs = std::filesystem;

bool is_archive_id(std::string_view id) noexcept {
  // CC-MAIN-YYYY-WW
  if (id.size() != 15 || !id.starts_with("CC-MAIN-") || id[12] != '-') return false;
  for (std::size_t i : {8u, 9u, 10u, 11u, 13u, 14u})
    if (id[i] < '0' || id[i] > '9') return false;
  int week = (id[13] - '0') * 10 + (id[14] - '0');
  return week >= 1 && week <= 53;
}

ArchiveLocator ArchiveLocator::make(std::string base_url, std::string archive_id) {
  if (!is_archive_id(archive_id))
    throw Error(Errc::InvalidArgument, "archive id '" + archive_id + "' is not CC-MAIN-YYYY-WW");
  if (base_url.empty()) throw Error(Errc::InvalidArgument, "empty base url");
  ArchiveLocator loc;
  loc.base_url = std::move(base_url);
  loc.archive_id = std::move(archive_id);
  return loc;
}

std::string ArchiveLocator::object_path(std::string_view file) const {
  std::string path = layout;
  auto replace = [&](std::string_view token, std::string_view value) {
    for (auto pos = path.find(token); pos != std::string::npos; pos = path.find(token, pos))
      path.replace(pos, token.size(), value), pos += value.size();
  };
  replace("{archive}", archive_id);
  replace("{file}", file);
  return path;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry,
                                        std::mt19937_64& rng) {
  double base = static_cast<double>(policy.initial_delay.count());
  double cap = static_cast<double>(policy.max_delay.count());
  double d = base;
  for (int i = 1; i < retry && d < cap; ++i) d *= 2;
  d = std::min(d, cap);
  std::uniform_real_distribution<double> jitter(1.0 - policy.jitter, 1.0 + policy.jitter);
  return std::chrono::milliseconds(static_cast<long long>(d * jitter(rng)));
}

struct RangeFetcher::Gate {
  explicit Gate(int n) : sem(n) {}
  std::counting_semaphore<256> sem;
};

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, no trailing '/'
};

Endpoint split_base(const std::string& base) {
  auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos)
    throw Error(Errc::InvalidArgument, "base url '" + base + "' has no scheme");
  auto path_start = base.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = base.substr(0, path_start);
  if (path_start != std::string::npos) ep.prefix = base.substr(path_start);
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto cli = std::make_unique<httplib::Client>(ep.origin);
  if (!cli->is_valid())
    throw Error(Errc::InvalidArgument, "unsupported base url '" + ep.origin + "'");
  cli->set_connection_timeout(timeout);
  cli->set_read_timeout(timeout);
  cli->set_follow_location(true);
  return cli;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read;
}

std::mt19937_64& jitter_rng() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return rng;
}

// Holds a gate slot for the lifetime of one request.
class Slot {
 public:
  explicit Slot(std::counting_semaphore<256>& s) : sem_(s) { sem_.acquire(); }
  ~Slot() { sem_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<256>& sem_;
};

}  // namespace

RangeFetcher::RangeFetcher(ArchiveLocator locator, FetchOptions options)
    : locator_(std::move(locator)),
      options_(options),
      gate_(std::make_unique<Gate>(std::clamp(options.max_connections, 1, 256))) {
  split_base(locator_.base_url);
}

RangeFetcher::~RangeFetcher() = default;

std::string RangeFetcher::fetch_range(const std::string& file, std::uint64_t offset,
                                      std::uint64_t length) const {
  if (length == 0) throw Error(Errc::InvalidArgument, "range length must be positive");
  Endpoint ep = split_base(locator_.base_url);
  std::string path = ep.prefix + "/" + locator_.object_path(file);
  httplib::Headers headers{
      {"Range", "bytes=" + std::to_string(offset) + "-" + std::to_string(offset + length - 1)}};

  int last_status = 0;
  bool last_timeout = false;
  std::string last_reason;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(backoff_delay(options_.retry, attempt - 1, jitter_rng()));
    httplib::Result res;
    {
      Slot slot(gate_->sem);
      ++requests_;
      res = make_client(ep, options_.timeout)->Get(path, headers);
    }
    if (!res) {
      last_status = 0;
      last_timeout = is_timeout(res.error());
      last_reason = httplib::to_string(res.error());
      continue;
    }
    last_timeout = false;
    last_status = res->status;
    if (res->status == 206) {
      if (res->body.size() == length) return std::move(res->body);
      last_reason = "short body (" + std::to_string(res->body.size()) + " of " +
                    std::to_string(length) + " bytes)";
      continue;
    }
    if (res->status == 200) {
      // Server ignored the Range header and sent the whole object.
      if (res->body.size() >= offset + length) return res->body.substr(offset, length);
      throw HttpError(Errc::HttpStatus, 416, path + ": object shorter than requested range");
    }
    if (!retryable_status(res->status))
      throw HttpError(Errc::HttpStatus, res->status, path + ": HTTP " + std::to_string(res->status));
    last_reason = "HTTP " + std::to_string(res->status);
  }
  if (last_timeout) throw HttpError(Errc::Timeout, 0, path + ": " + last_reason);
  throw HttpError(Errc::TooManyRetries, last_status,
                  path + ": gave up after " + std::to_string(options_.retry.max_attempts) +
                      " attempts (" + last_reason + ")");
}

fs::path RangeFetcher::fetch_master(const fs::path& cache_dir) const {
  fs::path dir = cache_dir / locator_.archive_id;
  fs::path target = dir / "cluster.idx";
  if (fs::exists(target)) return target;
  fs::create_directories(dir);

  Endpoint ep = split_base(locator_.base_url);
  std::string path = ep.prefix + "/" + locator_.object_path("cluster.idx");
  std::uniform_int_distribution<unsigned long long> tag;
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, ".part-%016llx", tag(jitter_rng()));
  fs::path partial = dir / ("cluster.idx" + std::string(suffix));

  int last_status = 0;
  bool last_timeout = false;
  std::string last_reason;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(backoff_delay(options_.retry, attempt - 1, jitter_rng()));
    httplib::Result res;
    int status = 0;
    {
      std::ofstream out(partial, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(Errc::Io, "cannot write " + partial.string());
      Slot slot(gate_->sem);
      ++requests_;
      res = make_client(ep, options_.timeout)
                ->Get(path, httplib::Headers{},
                      [&](const httplib::Response& r) {
                        status = r.status;
                        return true;
                      },
                      [&](const char* data, std::size_t n) {
                        if (status != 200) return true;
                        out.write(data, static_cast<std::streamsize>(n));
                        return static_cast<bool>(out);
                      });
    }
    if (res && res->status == 200) {
      if (options_.master_sha256 && sha256_file(partial) != *options_.master_sha256) {
        fs::remove(partial);
        throw Error(Errc::ChecksumMismatch, path + ": SHA-256 differs from configured digest");
      }
      fs::rename(partial, target);
      return target;
    }
    fs::remove(partial);
    if (!res) {
      last_status = 0;
      last_timeout = is_timeout(res.error());
      last_reason = httplib::to_string(res.error());
      continue;
    }
    last_timeout = false;
    last_status = res->status;
    if (!retryable_status(res->status))
      throw HttpError(Errc::HttpStatus, res->status, path + ": HTTP " + std::to_string(res->status));
    last_reason = "HTTP " + std::to_string(res->status);
  }
  if (last_timeout) throw HttpError(Errc::Timeout, 0, path + ": " + last_reason);
  throw HttpError(Errc::TooManyRetries, last_status,
                  path + ": gave up after " + std::to_string(options_.retry.max_attempts) +
                      " attempts (" + last_reason + ")");
}

std::uintmax_t clear_cache(const fs::path& cache_dir) {
  if (!fs::exists(cache_dir)) return 0;
  std::uintmax_t removed = 0;
  for (const auto& entry : fs::directory_iterator(cache_dir)) removed += fs::remove_all(entry.path());
  return removed;
}

}  // namespace ccseg
