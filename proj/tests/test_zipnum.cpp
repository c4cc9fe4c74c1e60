#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "ccseg/error.hpp"
#include "ccseg/gzip.hpp"
#include "ccseg/synth.hpp"
#include "ccseg/zipnum.hpp"
#include "support.hpp"

using namespace ccseg;

namespace {

// Shard access over in-memory shards that counts calls.
class MemoryShards final : public ShardAccess {
 public:
  std::map<std::string, std::string> files;
  mutable int reads = 0;
  std::string read_range(const std::string& name, std::uint64_t offset, std::uint64_t length) const override {
    ++reads;
    const auto& f = files.at(name);
    if (offset + length > f.size()) throw Error(Errc::RangeUnavailable, "beyond end");
    return f.substr(offset, length);
  }
};

std::string line_for(const std::string& key, int i) {
  char ts[16];
  std::snprintf(ts, sizeof ts, "2021061317%04d", i % 6000);
  return key + " " + ts + R"( {"url": "https://x/", "mime": "text/html", "status": "200", "digest": "AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA", "length": "1", "offset": ")" +
         std::to_string(i) + R"(", "filename": "f"})";
}

// Appends blocks of lines to one shard and records master lines.
struct Builder {
  MemoryShards shards;
  MasterIndex master;
  void add_block(const std::string& shard, const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    std::string member = gzip_member(text);
    auto& f = shards.files[shard];
    MasterIndexLine m;
    m.first_urlkey = UrlKey(std::string(oracle::key_of(lines.front())));
    m.shard_name = shard;
    m.block_offset = f.size();
    m.block_length = member.size();
    master.push_back(m);
    f += member;
  }
};

}  // namespace

TEST_CASE("published lookup example") {
  Builder b;
  b.add_block("cdx-00253.gz", {line_for("org,w3)/tr/tr.xml", 1), line_for("org,w3)/tr/wd-xml", 2),
                               fixture::kRedirectLine, fixture::kWarcLine, line_for("org,w3)/tr/xml-names", 3)});
  b.add_block("cdx-00253.gz", {line_for("org,w3)/wai/videos/standards-and-benefits/ja", 4)});
  LookupCounters c;
  auto entries = lookup(UrlKey("org,w3)/tr/xml"), b.master, b.shards, &c);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].status == 301);
  CHECK(entries[1].status == 200);
  CHECK(c.blocks_read == 1);
  CHECK(lookup(UrlKey("org,w3)/tr/xmlz"), b.master, b.shards).empty());
  CHECK(lookup(UrlKey("aaa"), b.master, b.shards).empty());
}

TEST_CASE("locate_block boundaries") {
  Builder b;
  b.add_block("cdx-00000.gz", {line_for("b", 0)});
  b.add_block("cdx-00000.gz", {line_for("d", 1)});
  b.add_block("cdx-00001.gz", {line_for("f", 2)});
  CHECK(!locate_block(b.master, UrlKey("a")));
  CHECK(locate_block(b.master, UrlKey("b")) == std::optional<std::size_t>(0));
  CHECK(locate_block(b.master, UrlKey("c")) == std::optional<std::size_t>(0));
  CHECK(locate_block(b.master, UrlKey("d")) == std::optional<std::size_t>(1));
  CHECK(locate_block(b.master, UrlKey("z")) == std::optional<std::size_t>(2));
  CHECK_ERRC(locate_block(MasterIndex{}, UrlKey("a")), Errc::EmptyMaster);
}

TEST_CASE("locate_block matches a linear scan on a 50-line master") {
  std::mt19937_64 rng(11);
  auto word = [&] {
    std::string s;
    for (int i = 0, n = 1 + int(rng() % 5); i < n; ++i) s.push_back(char('a' + rng() % 6));
    return s;
  };
  std::vector<std::string> keys;
  while (keys.size() < 50) keys.push_back(word());
  std::sort(keys.begin(), keys.end());
  MasterIndex master;
  for (const auto& k : keys) master.push_back(parse_master_line(k + " cdx-00000.gz 0 1"));
  for (int i = 0; i < 1000; ++i) {
    UrlKey k(word());
    std::optional<std::size_t> expect;
    for (std::size_t j = 0; j < master.size(); ++j)
      if (master[j].first_urlkey <= k) expect = j;
    LookupCounters c;
    CHECK(locate_block(master, k, &c) == expect);
    CHECK(c.master_comparisons <= static_cast<std::size_t>(std::ceil(std::log2(50.0))) + 1);
  }
}

TEST_CASE("read_block") {
  std::vector<std::string> lines;
  for (int i = 0; i < 3000; ++i) lines.push_back(line_for("k" + std::to_string(10000 + i), i));
  Builder b;
  b.add_block("cdx-00000.gz", lines);
  b.add_block("cdx-00000.gz", {line_for("z", 1), line_for("z", 2)});
  CHECK(read_block(handle_of(b.master[0]), b.shards) == lines);
  CHECK(read_block(handle_of(b.master[1]), b.shards).size() == 2);

  BlockHandle truncated = handle_of(b.master[1]);
  truncated.length -= 5;
  CHECK_ERRC(read_block(truncated, b.shards), Errc::BadGzipMember);
  BlockHandle both = handle_of(b.master[0]);
  both.length += b.master[1].block_length;
  CHECK_ERRC(read_block(both, b.shards), Errc::BadGzipMember);
  BlockHandle beyond = handle_of(b.master[1]);
  beyond.offset += 100000;
  CHECK_ERRC(read_block(beyond, b.shards), Errc::RangeUnavailable);
}

TEST_CASE("runs split across blocks") {
  Builder b;
  b.add_block("cdx-00000.gz", {line_for("a", 0), line_for("k", 1), line_for("k", 2)});
  b.add_block("cdx-00000.gz", {line_for("k", 3), line_for("k", 4)});
  b.add_block("cdx-00001.gz", {line_for("k", 5), line_for("m", 6)});
  LookupCounters c;
  // Only the last block starting at or before "k" is read.
  auto got = lookup_lines(UrlKey("k"), b.master, b.shards, &c);
  REQUIRE(got.size() == 1);
  CHECK(got[0] == line_for("k", 5));
  CHECK(c.blocks_read == 1);

  Builder f;
  f.add_block("cdx-00000.gz", {line_for("a", 0), line_for("k", 1), line_for("k", 2)});
  f.add_block("cdx-00000.gz", {line_for("l", 3), line_for("m", 4)});
  CHECK(lookup_lines(UrlKey("k"), f.master, f.shards).size() == 2);
}

TEST_CASE("lookup equals a full scan on a synthetic 3-shard index") {
  testutil::TempDir dir("zipnum");
  SynthSpec spec;
  spec.seed = 5;
  spec.n_segments = 10;
  spec.entries_per_segment = 300;
  spec.redirect_share = 0.2;
  auto archive = generate(spec);
  write_archive(archive, spec, dir.path());

  std::map<std::string, std::vector<std::string>> scan;
  std::vector<std::string> all;
  for (const char* shard : {"cdx-00000.gz", "cdx-00001.gz", "cdx-00002.gz"})
    for (auto& l : oracle::gz_lines(dir.path() / shard)) {
      scan[std::string(oracle::key_of(l))].push_back(l);
      all.push_back(l);
    }
  CHECK(all == archive.lines);

  auto master = load_master(dir.path() / "cluster.idx");
  CHECK(!first_unsorted(std::span<const MasterIndexLine>(master)));
  LocalShardAccess shards(dir.path());
  const auto bound = static_cast<std::size_t>(std::ceil(std::log2(double(master.size())))) + 1;
  for (const auto& [key, expect] : scan) {
    LookupCounters c;
    CHECK(lookup_lines(UrlKey(key), master, shards, &c) == expect);
    CHECK(c.blocks_read == 1);
    CHECK(c.master_comparisons <= bound);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    auto it = std::next(scan.begin(), static_cast<long>(rng() % scan.size()));
    std::string absent = it->first + "x";
    if (scan.count(absent)) continue;
    CHECK(lookup_lines(UrlKey(absent), master, shards).empty());
  }

  // Same lines cut into different block sizes give the same answers.
  testutil::TempDir dir2("zipnum-rechunk");
  spec.block_lines = 7;
  spec.n_shards = 2;
  write_archive(archive, spec, dir2.path());
  auto master2 = load_master(dir2.path() / "cluster.idx");
  LocalShardAccess shards2(dir2.path());
  for (const auto& [key, expect] : scan) CHECK(lookup_lines(UrlKey(key), master2, shards2) == expect);
}
