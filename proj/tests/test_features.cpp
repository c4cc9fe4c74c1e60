#include <doctest.h>

#include <cstdio>
#include <numeric>
#include <sstream>

#include "ccseg/error.hpp"
#include "ccseg/features.hpp"
#include "support.hpp"

using namespace ccseg;

namespace {

IndexEntry entry(std::string mime, std::optional<std::string> detected, int segment = 0,
                 std::vector<std::string> langs = {}, std::uint64_t length = 100,
                 const char* subset = "warc") {
  IndexEntry e;
  e.urlkey = UrlKey("com,example)/");
  e.timestamp14 = "20230921000000";
  e.url = "http://example.com/";
  e.mime = std::move(mime);
  e.mime_detected = std::move(detected);
  e.status = 200;
  e.digest = std::string(32, 'A');
  e.length = length;
  char seg[8];
  std::snprintf(seg, sizeof seg, "%02d", segment);
  e.filename = std::string("crawl-data/CC-MAIN-2023-40/segments/1695233505362.") + seg + "/" + subset + "/x.warc.gz";
  e.languages = std::move(langs);
  return e;
}

}  // namespace

TEST_CASE("mime pair labels") {
  CHECK(mime_pair_label(entry("text/html", "text/html")) == "text/html ditto");
  CHECK(mime_pair_label(entry("unk", "text/html")) == "unk text/html");
  CHECK(mime_pair_label(entry("text/html", "application/xhtml+xml")) == "text/html application/xhtml+xml");
  CHECK(mime_pair_label(entry("text/html", std::nullopt)) == "text/html -");
  // literal values spelled like the markers stay distinguishable
  CHECK(mime_pair_label(entry("text/html", "ditto")) == "text/html =ditto");
  CHECK(mime_pair_label(entry("text/html", "-")) == "text/html =-");
  CHECK(mime_pair_label(entry("text/html", "=x")) == "text/html ==x");
  CHECK(mime_pair_label(entry("ditto", "ditto")) == "ditto ditto");
}

TEST_CASE("tabulation by feature") {
  Tabulation mime({FeatureKind::MimePair, 100});
  mime.add(entry("text/html", "text/html", 3));
  mime.add(entry("text/html", "text/html", 3));
  mime.add(entry("unk", "text/html", 4));
  CHECK(mime.segment_counts(3).at("text/html ditto") == 2);
  CHECK(mime.segment_counts(4).at("unk text/html") == 1);
  CHECK_ERRC(mime.add(entry("text/html", "text/html", 3, {}, 1, "crawldiagnostics")), Errc::WrongSubset);
  CHECK_ERRC(mime.add(entry("text/html", "text/html", 3, {}, 1, "robotstxt")), Errc::WrongSubset);

  Tabulation lang({FeatureKind::LanguageFirst, 100});
  lang.add(entry("text/html", "text/html", 1, {"rus", "eng"}));
  lang.add(entry("text/html", "text/html", 1));
  CHECK(lang.segment_counts(1).size() == 1);
  CHECK(lang.segment_counts(1).at("rus") == 1);

  Tabulation lm({FeatureKind::LmhYear, 100});
  LastModRecord r;
  r.lm_posix = 1114316977;
  r.segment = SegmentRef{7, Subset::Warc};
  lm.add(r);
  r.segment.reset();
  lm.add(r);
  CHECK(lm.segment_counts(7).at("2005") == 1);
  CHECK(lm.whole_counts().at("2005") == 2);
  CHECK_ERRC(lm.add(entry("text/html", "text/html")), Errc::InvalidArgument);
}

TEST_CASE("tabulation is order independent and merges") {
  std::mt19937_64 rng(9);
  const char* mimes[] = {"text/html", "application/pdf", "image/jpeg", "text/plain"};
  std::vector<IndexEntry> entries;
  for (int i = 0; i < 3000; ++i)
    entries.push_back(entry(mimes[rng() % 4], rng() % 3 ? std::optional<std::string>(mimes[rng() % 4]) : std::nullopt,
                            static_cast<int>(rng() % 100), {}, 1 + rng() % 100000));
  auto table_of = [](const std::vector<IndexEntry>& es, FeatureKind k) {
    Tabulation t({k, 100});
    for (const auto& e : es) t.add(e);
    std::ostringstream out;
    write_tsv(build_table(t), out);
    return out.str();
  };
  auto shuffled = entries;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto k : {FeatureKind::MimePair, FeatureKind::LengthPercentile})
    CHECK(table_of(entries, k) == table_of(shuffled, k));

  Tabulation a({FeatureKind::MimePair, 100}), b({FeatureKind::MimePair, 100});
  for (std::size_t i = 0; i < entries.size(); ++i) (i % 2 ? a : b).add(entries[i]);
  a.merge(b);
  std::ostringstream merged;
  write_tsv(build_table(a), merged);
  CHECK(merged.str() == table_of(entries, FeatureKind::MimePair));

  // whole equals the sum of the segment columns when the whole is their union
  auto t = build_table(a);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::uint64_t sum = 0;
    for (const auto& c : t.cells[r]) sum += c.value_or(0);
    CHECK(sum == t.whole[r]);
  }
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<std::uint64_t> v(100);
  std::iota(v.begin(), v.end(), 1);
  auto p = percentile_vector(v);
  CHECK(p == v);
  CHECK(percentile_vector(std::vector<std::uint64_t>(7, 42)) == std::vector<std::uint64_t>(100, 42));
  CHECK_ERRC(percentile_vector(std::vector<std::uint64_t>{}), Errc::EmptyInput);

  std::mt19937_64 rng(4);
  std::vector<std::uint64_t> draws(10000);
  for (auto& d : draws) d = rng() % 5000;
  auto got = percentile_vector(draws);
  auto sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t q = 1; q <= 100; ++q) {
    std::size_t rank = static_cast<std::size_t>(std::ceil(static_cast<double>(q) * 10000.0 / 100.0));
    CHECK(got[q - 1] == sorted[rank - 1]);
  }
  std::vector<std::uint64_t> three = {30, 10, 20};
  auto small = percentile_vector(three);
  CHECK(small[0] == 10);   // ceil(0.03) = 1
  CHECK(small[33] == 20);  // p34: ceil(1.02) = 2
  CHECK(small[99] == 30);
}

TEST_CASE("merge_top_k") {
  std::map<std::string, std::uint64_t> whole = {{"a", 5}, {"b", 9}, {"c", 5}, {"d", 1}};
  std::vector<std::map<std::string, std::uint64_t>> segs = {{{"a", 2}, {"b", 4}}, {{"b", 5}, {"c", 5}}};
  auto t = merge_top_k(whole, segs, 3);
  CHECK(t.labels == std::vector<std::string>{"b", "a", "c"});
  CHECK(t.whole == std::vector<std::uint64_t>{9, 5, 5});
  CHECK(t.cells[1][1] == std::nullopt);
  CHECK(t.cells[2][0] == std::nullopt);
  CHECK(t.missing_cells() == 2);
  CHECK(merge_top_k(whole, segs, 50).rows() == 4);
}

TEST_CASE("merged table rows round-trip byte-exactly") {
  std::istringstream in(fixture::kMergedTable);
  auto t = read_tsv(in);
  REQUIRE(t.rows() == 3);
  CHECK(t.segment_ids == std::vector<int>{71, 72, 73});
  CHECK(t.whole[0] == 37711);
  CHECK(t.cells[0] == std::vector<std::optional<std::uint64_t>>{435, 364, 397});
  CHECK(t.cells[1][1] == std::nullopt);
  CHECK(t.missing_cells() == 1);
  std::ostringstream out;
  write_tsv(t, out);
  CHECK(out.str() == fixture::kMergedTable);

  std::istringstream commented("# archive: x\n" + fixture::kMergedTable);
  CHECK(read_tsv(commented).rows() == 3);
  std::istringstream bad("label\twhole\tseg71\nx\t1\n");
  CHECK_ERRC(read_tsv(bad), Errc::MalformedLine);
}

TEST_CASE("length table has p1..p100 rows") {
  Tabulation t({FeatureKind::LengthPercentile, 100}, 3);
  for (std::uint64_t i = 1; i <= 100; ++i) {
    t.add(entry("text/html", "text/html", 0, {}, i));
    t.add(entry("text/html", "text/html", 1, {}, 2 * i));
  }
  auto table = build_table(t);
  REQUIRE(table.rows() == 100);
  CHECK(table.labels.front() == "p1");
  CHECK(table.labels.back() == "p100");
  CHECK(table.cells[49][0] == std::optional<std::uint64_t>(50));
  CHECK(table.cells[49][1] == std::optional<std::uint64_t>(100));
  CHECK(table.segment_ids == std::vector<int>{0, 1});
  CHECK(table.whole[99] == 200);
}
