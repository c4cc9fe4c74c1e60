// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// all pass. Tolerances and runtime limits are fixed below.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "ccseg/cdx.hpp"
#include "ccseg/error.hpp"
#include "ccseg/features.hpp"
#include "ccseg/lastmod.hpp"
#include "ccseg/stats.hpp"
#include "ccseg/surt.hpp"
#include "ccseg/synth.hpp"
#include "ccseg/zipnum.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace ccseg;

namespace {

constexpr double kSpearmanTol = 1e-12;
constexpr double kFisherTol = 1e-12;
constexpr double kRecoveryRate = 0.99;
constexpr double kOracleGap = 0.05;
constexpr double kDivergence = 0.4;
constexpr double kSpikeFactor = 50.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1
Outcome surt_fixture() {
  auto got = canonicalize("https://www.w3.org/TR/xml/").str();
  return {got == "org,w3)/tr/xml", "got " + got};
}

// 2
Outcome posix_fixture() {
  auto got = parse_http_date("Sun, 24 Apr 2005 04:29:37 GMT");
  return {got == 1114316977, got ? "got " + std::to_string(*got) : "unparsed"};
}

// 3
Outcome spearman_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  std::size_t compared = 0, pairs = 0;
  for (; pairs < 1500; ++pairs) {
    std::size_t n = 5 + rng() % 97;
    unsigned levels = 2 + static_cast<unsigned>(rng() % 40);  // small ranges force ties
    double missing = static_cast<double>(rng() % 30) / 100.0;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::optional<double>> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (u(rng) >= missing) x[i] = static_cast<double>(rng() % levels);
      if (u(rng) >= missing) y[i] = static_cast<double>(rng() % levels) + (rng() % 2 ? 0.5 : 0.0);
    }
    auto expect = oracle::spearman(x, y);
    if (!expect) {
      try {
        spearman_omit(x, y);
        return {false, "accepted fewer than 3 pairs"};
      } catch (const Error& e) {
        if (e.code() != Errc::TooFewPairs) return {false, e.what()};
      }
      continue;
    }
    double got = spearman_omit(x, y).rho;
    if (std::isnan(*expect) || std::isnan(got)) {
      if (std::isnan(*expect) != std::isnan(got)) return {false, "NaN mismatch"};
      continue;
    }
    worst = std::max(worst, std::abs(got - *expect));
    ++compared;
  }
  return {compared >= 1000 && worst <= kSpearmanTol,
          std::to_string(compared) + " pairs, max |diff| " + fmt("%.3g", worst)};
}

// 4
Outcome fisher_grid() {
  double worst = 0;
  std::size_t cells = 0;
  for (int i = -99; i <= 99; ++i) {
    double rho = i / 100.0;
    for (std::size_t n : {4u, 5u, 10u, 30u, 100u, 103u, 1000u, 100000u}) {
      auto ci = fisher_ci(rho, n);
      auto [lo, hi] = oracle::fisher(rho, n);
      worst = std::max({worst, std::abs(ci.lo - lo), std::abs(ci.hi - hi)});
      if (ci.degenerate) return {false, "non-degenerate rho flagged"};
      ++cells;
    }
  }
  bool degenerate_ok = true;
  for (double rho : {1.0, -1.0}) {
    auto ci = fisher_ci(rho, 50);
    degenerate_ok = degenerate_ok && ci.degenerate && ci.lo == rho && ci.hi == rho;
  }
  return {worst <= kFisherTol && degenerate_ok,
          std::to_string(cells) + " cells, max |diff| " + fmt("%.3g", worst) +
              (degenerate_ok ? ", |rho|=1 collapsed" : ", |rho|=1 mishandled")};
}

// 5
Outcome zipnum_lookup() {
  testutil::TempDir dir("acceptance-zipnum");
  SynthSpec spec;
  spec.seed = 5;
  spec.n_segments = 10;
  spec.entries_per_segment = 1000;
  spec.redirect_share = 0;
  spec.block_lines = 30;
  spec.n_shards = 3;
  auto archive = generate(spec);
  write_archive(archive, spec, dir.path());

  std::map<std::string, std::vector<std::string>> scan;
  std::size_t lines = 0;
  for (int s = 0; s < 3; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "cdx-%05d.gz", s);
    for (auto& l : oracle::gz_lines(dir.path() / name)) {
      scan[std::string(oracle::key_of(l))].push_back(l);
      ++lines;
    }
  }
  auto master = load_master(dir.path() / "cluster.idx");
  LocalShardAccess shards(dir.path());
  const auto bound = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(master.size())))) + 1;

  std::size_t worst_cmp = 0, mismatches = 0, bad_blocks = 0, absent = 0;
  auto check = [&](const std::string& key, const std::vector<std::string>& expect) {
    LookupCounters c;
    if (lookup_lines(UrlKey(key), master, shards, &c) != expect) ++mismatches;
    if (c.blocks_read != 1) ++bad_blocks;
    worst_cmp = std::max(worst_cmp, c.master_comparisons);
  };
  for (const auto& [key, expect] : scan) check(key, expect);
  std::mt19937_64 rng(55);
  std::vector<std::string> keys;
  for (const auto& kv : scan) keys.push_back(kv.first);
  while (absent < 1000) {
    std::string key = keys[rng() % keys.size()];
    key += rng() % 2 ? "/zz" + std::to_string(rng() % 1000) : "~";
    if (scan.count(key)) continue;
    check(key, {});
    ++absent;
  }
  return {lines >= 10000 && mismatches == 0 && bad_blocks == 0 && worst_cmp <= bound,
          std::to_string(lines) + " lines, " + std::to_string(scan.size()) + " present + " +
              std::to_string(absent) + " absent keys, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(bad_blocks) + " lookups not reading one block, max comparisons " +
              std::to_string(worst_cmp) + " <= " + std::to_string(bound)};
}

// 6
Outcome proxy_self() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  std::size_t trials = 0, wrong = 0;
  for (; trials < 200; ++trials) {
    int n = 3 + static_cast<int>(rng() % 98);
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    CorrelationMatrix m(ids);
    for (std::size_t i = 0; i < m.dim(); ++i)
      for (std::size_t j = i; j < m.dim(); ++j) m.set(i, j, i == j ? 1.0 : u(rng), 50);
    auto h = proxy_eval(m, m, 1);
    if (std::abs(h.scores.at(0) - (100.0 - 50.0 / n)) > 1e-9) ++wrong;
    // with 100 segments the midrank score of the top value is 99.5
    if (n == 100 && h.scores[0] != 99.5) ++wrong;
  }
  CorrelationMatrix full([] {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    return v;
  }());
  for (std::size_t i = 0; i < full.dim(); ++i)
    for (std::size_t j = i; j < full.dim(); ++j) full.set(i, j, i == j ? 1.0 : u(rng), 50);
  double s = proxy_eval(full, full, 1).scores.at(0);
  return {wrong == 0 && s == 99.5, std::to_string(trials) + " matrices, 100-segment score " + fmt("%.4f", s)};
}

// 7
Outcome ranking_recovery() {
  const int seeds = 100;
  int recovered = 0;
  double min_gap = 1e9;
  for (int seed = 1; seed <= seeds; ++seed) {
    SynthSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.n_segments = 100;
    spec.entries_per_segment = 1000;
    std::mt19937_64 pick(static_cast<std::uint64_t>(seed) * 7919);
    std::set<int> chosen;
    while (chosen.size() < 5) chosen.insert(static_cast<int>(pick() % 100));
    for (int id : chosen) spec.perturbed.push_back({id, kDivergence});

    // expected separation from the generating distributions alone
    auto whole = whole_mime_distribution(spec);
    std::vector<std::optional<double>> w(whole.begin(), whole.end());
    double worst_plain = 1, best_perturbed = -1;
    for (int s = 0; s < 100; ++s) {
      auto d = segment_mime_distribution(spec, s);
      double r = *oracle::spearman(std::vector<std::optional<double>>(d.begin(), d.end()), w);
      if (chosen.count(s)) best_perturbed = std::max(best_perturbed, r);
      else worst_plain = std::min(worst_plain, r);
    }
    min_gap = std::min(min_gap, worst_plain - best_perturbed);

    auto archive = generate(spec);
    Tabulation tab({FeatureKind::MimePair, 100}, 100);
    for (const auto& line : archive.lines) {
      auto e = parse_index_line(line);
      if (segment_of(e.filename).subset == Subset::Warc) tab.add(e);
    }
    auto ranking = rank_segments(correlation_matrix(build_table(tab)));
    std::set<int> bottom;
    for (std::size_t i = ranking.size() - 10; i < ranking.size(); ++i) bottom.insert(ranking[i].segment_id);
    if (std::includes(bottom.begin(), bottom.end(), chosen.begin(), chosen.end())) ++recovered;
  }
  double rate = static_cast<double>(recovered) / seeds;
  return {min_gap > kOracleGap && rate >= kRecoveryRate,
          std::to_string(recovered) + "/" + std::to_string(seeds) + " seeds, oracle rho gap >= " +
              fmt("%.3f", min_gap)};
}

// Records accepted from a default-profile synthetic archive of 5*10^4 entries.
std::vector<LastModRecord> synthetic_records(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.entries_per_segment = 500;
  spec.redirect_share = 0;
  auto archive = generate(spec);
  std::vector<LastModRecord> out;
  ParseStats stats;
  for (const auto& row : archive.lastmod)
    if (auto r = accept_row(row, stats)) out.push_back(*r);
  return out;
}

std::uint64_t top_bucket_in_year(const std::vector<LastModRecord>& rs, int year) {
  std::map<std::int64_t, std::uint64_t> buckets;
  for (const auto& r : rs)
    if (utc_year(r.lm_posix) == year) ++buckets[r.lm_posix / kAnomalyBucketSeconds];
  std::uint64_t best = 0;
  for (const auto& [id, c] : buckets) best = std::max(best, c);
  return best;
}

// 8
Outcome anomaly_detection() {
  int detected = 0, false_positive_seeds = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    auto rs = synthetic_records(static_cast<std::uint64_t>(1000 + seed));
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    int year = 2005 + static_cast<int>(rng() % 15);
    std::int64_t value = oracle::posix(year, 1 + static_cast<int>(rng() % 12), 1 + static_cast<int>(rng() % 28),
                                       static_cast<int>(rng() % 24), static_cast<int>(rng() % 60), 0);
    std::uint64_t adjacent = std::max<std::uint64_t>(
        {top_bucket_in_year(rs, year - 1), top_bucket_in_year(rs, year + 1), 1});
    auto count = static_cast<std::uint64_t>(kSpikeFactor * static_cast<double>(adjacent));
    for (std::uint64_t i = 0; i < count; ++i) {
      LastModRecord r;
      r.lm_posix = value;
      r.crawl_posix = 1695254400;
      rs.push_back(r);
    }
    auto reports = detect_anomalies(rs);
    if (reports.size() == 1 && reports[0].dominant_value == value) ++detected;
  }
  for (int seed = 1; seed <= 20; ++seed)
    if (!detect_anomalies(synthetic_records(static_cast<std::uint64_t>(5000 + seed))).empty())
      ++false_positive_seeds;
  return {detected == 100 && false_positive_seeds == 0,
          std::to_string(detected) + "/100 spikes found exactly, " + std::to_string(false_positive_seeds) +
              "/20 clean seeds with reports"};
}

// 9
Outcome parsing_fixtures() {
  int ok = 0;
  for (const auto& line : {fixture::kRedirectLine, fixture::kWarcLine})
    if (to_line(parse_index_line(line)) == line) ++ok;
  std::istringstream in(fixture::kMergedTable);
  auto t = read_tsv(in);
  std::ostringstream out;
  write_tsv(t, out);
  bool cells = t.rows() == 3 && t.whole[0] == 37711 && t.cells[0][0] == 435u && t.cells[0][1] == 364u &&
               t.cells[0][2] == 397u && !t.cells[1][1] && t.missing_cells() == 1;
  bool table = out.str() == fixture::kMergedTable;
  return {ok == 2 && cells && table, std::to_string(ok) + "/2 index lines exact, table " +
                                         (table && cells ? "exact" : "differs")};
}

std::map<std::string, std::string> artifacts_of(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  return out;
}

// 10
Outcome pipeline_determinism() {
  testutil::TempDir dir("acceptance-pipeline");
  SynthSpec spec;
  spec.seed = 10;
  spec.perturbed = {{13, 0.3}, {61, 0.3}};
  spec.boosted = {{12, 10.0}, {56, 10.0}};
  spec.anomalies = {{1262304000, 400}};
  auto archive = generate(spec);
  write_archive(archive, spec, dir.path() / "archive");

  std::vector<std::map<std::string, std::string>> runs;
  std::vector<std::string> stdouts;
  for (const char* threads : {"1", "1", "8"}) {
    auto out_dir = dir.path() / ("run" + std::to_string(runs.size()));
    std::vector<std::string> args = {"ccseg", "pipeline", "--index-dir", (dir.path() / "archive").string(),
                                     "-o", out_dir.string(), "--threads", threads};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    std::istringstream in;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, in);
    if (code != 0) return {false, "pipeline exited " + std::to_string(code) + ": " + err.str()};
    runs.push_back(artifacts_of(out_dir));
    stdouts.push_back(out.str());
  }
  bool same = runs[0] == runs[1] && runs[0] == runs[2] && stdouts[0] == stdouts[1] && stdouts[0] == stdouts[2];
  return {same && runs[0].size() > 10,
          std::to_string(runs[0].size()) + " artifacts, " + (same ? "byte-identical" : "differ") +
              " across 2 runs and threads 1/8"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "surt fixture", 1, surt_fixture},
      {2, "posix fixture", 1, posix_fixture},
      {3, "spearman oracle", 30, spearman_oracle},
      {4, "fisher interval", 5, fisher_grid},
      {5, "zipnum lookup", 60, zipnum_lookup},
      {6, "proxy self-prediction", 1, proxy_self},
      {7, "segment-ranking recovery", 300, ranking_recovery},
      {8, "anomaly detection", 120, anomaly_detection},
      {9, "parsing fixtures", 1, parsing_fixtures},
      {10, "pipeline determinism", 300, pipeline_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass && secs < c.limit_s;
    if (!pass) ++failed;
    std::printf("%s %2d %s: %s (%.2fs, limit %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
