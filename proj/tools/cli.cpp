#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccseg/cdx.hpp"
#include "ccseg/digest.hpp"
#include "ccseg/error.hpp"
#include "ccseg/features.hpp"
#include "ccseg/fetch.hpp"
#include "ccseg/lastmod.hpp"
#include "ccseg/stats.hpp"
#include "ccseg/surt.hpp"
#include "ccseg/synth.hpp"
#include "ccseg/urimetrics.hpp"
#include "ccseg/zipnum.hpp"

namespace ccseg::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code_of(Errc code) {
  switch (code) {
    case Errc::MissingScheme:
    case Errc::EmptyAuthority:
    case Errc::NotAbsolute:
    case Errc::InvalidArgument:
    case Errc::InvalidSpec:
    case Errc::BadTimestamp:
      return kUsage;
    case Errc::HttpStatus:
    case Errc::Timeout:
    case Errc::TooManyRetries:
    case Errc::RangeUnavailable:
      return kNetwork;
    default:
      return kIntegrity;
  }
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Where the index comes from. Exactly one of index_dir / base_url is used.
struct SourceOptions {
  std::string index_dir;
  std::string base_url;
  std::string archive_id;
  std::string cache_dir;
  int max_connections = 4;
};

struct Settings {
  std::string config_path;
  nlohmann::json config = nlohmann::json::object();
};

std::string config_string(const Settings& s, const char* key) {
  if (s.config.contains(key) && s.config.at(key).is_string()) return s.config.at(key).get<std::string>();
  return {};
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void add_source_options(CLI::App* cmd, SourceOptions& src) {
  cmd->add_option("--index-dir", src.index_dir, "Local directory holding cluster.idx and shards");
  cmd->add_option("--base-url", src.base_url, "Remote base URL (env CCSEG_BASE_URL)");
  cmd->add_option("--archive", src.archive_id, "Archive id, CC-MAIN-YYYY-WW");
  cmd->add_option("--cache-dir", src.cache_dir, "Cache directory (env CCSEG_CACHE_DIR)");
  cmd->add_option("--max-connections", src.max_connections, "Concurrent range requests")
      ->check(CLI::Range(1, 256));
}

struct OpenedIndex {
  std::unique_ptr<RangeFetcher> fetcher;
  std::unique_ptr<ShardAccess> shards;
  MasterIndex master;
  std::string archive_id;
  std::string master_digest;
  fs::path local_dir;  // empty in remote mode
};

std::string manifest_archive_id(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) return {};
  try {
    auto j = nlohmann::json::parse(in);
    return j.value("archive_id", std::string());
  } catch (const nlohmann::json::exception&) {
    return {};
  }
}

std::string resolve_cache_dir(const SourceOptions& src, const Settings& settings) {
  if (!src.cache_dir.empty()) return src.cache_dir;
  auto from_config = config_string(settings, "cache_dir");
  return env_or("CCSEG_CACHE_DIR", from_config.empty() ? std::string(".ccseg-cache") : from_config);
}

OpenedIndex open_index(SourceOptions src, const Settings& settings) {
  if (!src.index_dir.empty() && !src.base_url.empty())
    throw Error(Errc::InvalidArgument, "give either --index-dir or --base-url, not both");
  if (src.index_dir.empty() && src.base_url.empty()) {
    src.index_dir = config_string(settings, "index_dir");
    if (src.index_dir.empty())
      src.base_url = env_or("CCSEG_BASE_URL", config_string(settings, "base_url"));
  }
  if (src.index_dir.empty() && src.base_url.empty())
    throw Error(Errc::InvalidArgument, "no index source: use --index-dir or --base-url");
  if (src.archive_id.empty()) src.archive_id = config_string(settings, "archive_id");

  OpenedIndex o;
  fs::path master_path;
  if (!src.index_dir.empty()) {
    o.local_dir = src.index_dir;
    master_path = o.local_dir / "cluster.idx";
    if (!fs::exists(master_path)) throw Error(Errc::Io, "missing " + master_path.string());
    o.shards = std::make_unique<LocalShardAccess>(o.local_dir);
    o.archive_id = src.archive_id.empty() ? manifest_archive_id(o.local_dir) : src.archive_id;
    if (o.archive_id.empty()) o.archive_id = "local";
  } else {
    FetchOptions opts;
    opts.max_connections = src.max_connections;
    o.fetcher = std::make_unique<RangeFetcher>(ArchiveLocator::make(src.base_url, src.archive_id), opts);
    master_path = o.fetcher->fetch_master(resolve_cache_dir(src, settings));
    o.shards = std::make_unique<HttpShardAccess>(*o.fetcher);
    o.archive_id = src.archive_id;
  }
  o.master = load_master(master_path);
  o.master_digest = sha256_file(master_path);
  return o;
}

// ---- artifact headers -------------------------------------------------------

struct Provenance {
  std::string archive_id;
  std::string command;
  std::string config_digest;
};

std::string digest_of(const ordered_json& config) { return sha256_hex(config.dump()).substr(0, 16); }

void write_header(std::ostream& out, const Provenance& p) {
  out << "# archive: " << p.archive_id << "\n# command: " << p.command
      << "\n# config: " << p.config_digest << '\n';
}

// Writes header plus body to `path`, or to `out` when path is empty or "-".
// Returns the SHA-256 of the bytes written.
std::string emit(const std::string& path, std::ostream& out, const Provenance& p,
                 const std::function<void(std::ostream&)>& body) {
  std::ostringstream buf;
  write_header(buf, p);
  body(buf);
  std::string text = buf.str();
  if (path.empty() || path == "-") {
    out << text;
  } else {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    std::ofstream f(target, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::Io, "cannot write " + path);
    f << text;
    if (!f) throw Error(Errc::Io, "write failed: " + path);
  }
  return sha256_hex(text);
}

std::string fmt_fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- index tabulation ------------------------------------------------------

std::vector<Tabulation> tabulate_index(const OpenedIndex& idx, const std::vector<FeatureSpec>& specs,
                                       unsigned threads) {
  const std::size_t n_blocks = idx.master.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n_blocks))));
  std::vector<std::vector<Tabulation>> parts(threads);
  std::vector<std::exception_ptr> failures(threads);
  auto work = [&](unsigned t) {
    try {
      for (const auto& s : specs) parts[t].emplace_back(s);
      std::size_t lo = n_blocks * t / threads, hi = n_blocks * (t + 1) / threads;
      for (std::size_t b = lo; b < hi; ++b) {
        for (const auto& line : read_block(handle_of(idx.master[b]), *idx.shards)) {
          IndexEntry e = parse_index_line(line);
          SegmentRef seg = segment_of(e.filename);
          if (seg.subset != Subset::Warc) continue;
          for (auto& tab : parts[t]) tab.add(e, seg);
        }
      }
    } catch (...) {
      failures[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  std::vector<Tabulation> merged = std::move(parts[0]);
  for (unsigned t = 1; t < threads; ++t)
    for (std::size_t k = 0; k < merged.size(); ++k) merged[k].merge(parts[t][k]);
  return merged;
}

struct LastModInput {
  std::vector<ExtractionRow> rows;
  std::vector<LastModRecord> records;
  std::vector<std::size_t> row_of_record;
  ParseStats stats;
  std::string digest;
};

LastModInput load_lastmod(const fs::path& path, const CredibilityWindow& window) {
  LastModInput li;
  std::string text = read_text(path);
  li.digest = sha256_hex(text);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    li.rows.push_back(parse_extraction_row(line));
    if (auto rec = accept_row(li.rows.back(), li.stats, window)) {
      li.records.push_back(std::move(*rec));
      li.row_of_record.push_back(li.rows.size() - 1);
    }
  }
  return li;
}

void write_stats(std::ostream& out, const ParseStats& s) {
  out << "# total: " << s.total << "\n# absent: " << s.absent << "\n# accepted: " << s.accepted
      << "\n# rejected_unusable: " << s.rejected_unusable
      << "\n# rejected_incredible: " << s.rejected_incredible << '\n';
}

void write_periods(std::ostream& out, const std::vector<std::pair<std::string, std::uint64_t>>& rows) {
  out << "period\tcount\n";
  for (const auto& [p, c] : rows) out << p << '\t' << c << '\n';
}

void write_offsets(std::ostream& out, const OffsetHistogram& h, std::size_t top) {
  out << "# records: " << h.total << "\n# top" << top << "_coverage: " << fmt_fixed(h.coverage(top)) << '\n';
  out << "offset\tcount\tshare\n";
  for (const auto& [off, c] : h.top(top))
    out << off << '\t' << c << '\t' << fmt_fixed(h.total ? double(c) / double(h.total) : 0.0) << '\n';
}

void write_anomalies(std::ostream& out, const std::vector<AnomalyReport>& reports) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_fixed(*v, 3) : std::string("nan"); };
  out << "bucket_id\tyear\trank\tbucket_count\tdominant_value\tdominant_date\tdominant_count\t"
         "dominant_share\trunner_up_ratio\tprev_year_ratio\tnext_year_ratio\n";
  for (const auto& r : reports)
    out << r.bucket_id << '\t' << r.year << '\t' << r.rank << '\t' << r.bucket_count << '\t'
        << r.dominant_value << '\t' << format_http_date(r.dominant_value) << '\t' << r.dominant_count
        << '\t' << fmt_fixed(r.dominant_share) << '\t' << opt(r.runner_up_ratio) << '\t'
        << opt(r.prev_year_ratio) << '\t' << opt(r.next_year_ratio) << '\n';
}

std::vector<YearMetric> year_metrics(const LastModInput& li, std::uint64_t& skipped) {
  std::vector<YearMetric> out;
  for (std::size_t i = 0; i < li.records.size(); ++i) {
    try {
      out.push_back({utc_year(li.records[i].lm_posix), measure(li.rows[li.row_of_record[i]].url)});
    } catch (const Error&) {
      ++skipped;
    }
  }
  return out;
}

std::optional<Granularity> parse_granularity(std::string_view s) {
  if (s == "year") return Granularity::Year;
  if (s == "month") return Granularity::Month;
  if (s == "day") return Granularity::Day;
  return std::nullopt;
}

std::vector<std::pair<std::string, std::uint64_t>> filter_prefix(
    std::vector<std::pair<std::string, std::uint64_t>> rows, const std::string& prefix) {
  if (prefix.empty()) return rows;
  std::erase_if(rows, [&](const auto& r) { return r.first.rfind(prefix, 0) != 0; });
  return rows;
}

// Per-basis proxy selection: the top `n` basis segments, and how their
// averaged target rho places among all segments of each target.
void write_selection(std::ostream& out, const std::vector<std::pair<std::string, CorrelationMatrix>>& mats,
                     std::size_t n) {
  out << "basis\ttop_n\tsegments\ttarget\tscore\n";
  for (const auto& [bname, basis] : mats) {
    for (const auto& [tname, target] : mats) {
      auto h = proxy_eval(basis, target, n, bname, tname);
      const auto& chosen = h.chosen.at(n - 1);
      std::string ids;
      for (std::size_t i = 0; i < chosen.size(); ++i) ids += (i ? "," : "") + std::to_string(chosen[i]);
      out << bname << '\t' << n << '\t' << ids << '\t' << tname << '\t' << fmt_fixed(h.scores.at(n - 1), 3) << '\n';
    }
  }
}

// ---- subcommands -----------------------------------------------------------

int cmd_surt(const std::vector<std::string>& uris, std::ostream& out, std::ostream& err, std::istream& in) {
  int rc = kOk;
  auto one = [&](const std::string& u) {
    try {
      out << canonicalize(u).str() << '\n';
    } catch (const Error& e) {
      err << "ccseg surt: " << u << ": " << e.what() << '\n';
      rc = kUsage;
    }
  };
  if (!uris.empty()) {
    for (const auto& u : uris) one(u);
  } else {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) one(line);
    }
  }
  return rc;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Segment-level analysis of web-archive CDX indexes", "ccseg"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  Settings settings;
  app.add_option("--config", settings.config_path, "JSON config file (base_url, cache_dir, archive_id, index_dir)");

  // surt
  std::vector<std::string> surt_uris;
  auto* surt = app.add_subcommand("surt", "Print the urlkey of each URI (stdin when none given)");
  surt->add_option("uri", surt_uris);

  // lookup
  SourceOptions lookup_src;
  std::string lookup_uri;
  bool lookup_is_key = false, count_ops = false;
  auto* lookup = app.add_subcommand("lookup", "Print index entries for a URI");
  add_source_options(lookup, lookup_src);
  lookup->add_option("uri", lookup_uri)->required();
  lookup->add_flag("--key", lookup_is_key, "Argument is already a urlkey");
  lookup->add_flag("--count-ops", count_ops, "Print comparison and block counters");

  // tabulate
  SourceOptions tab_src;
  std::string tab_feature = "mime_pair", tab_out, tab_lastmod;
  std::size_t top_k = 100;
  unsigned threads = default_threads();
  auto* tabulate = app.add_subcommand("tabulate", "Per-segment feature table");
  add_source_options(tabulate, tab_src);
  tabulate->add_option("--feature", tab_feature, "mime_pair|language_first|length_percentile|lmh_year");
  tabulate->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  tabulate->add_option("--lastmod", tab_lastmod, "Extraction file, for lmh_year");
  tabulate->add_option("-o,--output", tab_out);
  tabulate->add_option("--threads", threads)->check(CLI::PositiveNumber);

  // correlate
  std::string corr_table, corr_out;
  auto* correlate = app.add_subcommand("correlate", "Rank-correlation matrix of a feature table");
  correlate->add_option("--table", corr_table)->required()->check(CLI::ExistingFile);
  correlate->add_option("-o,--output", corr_out);
  correlate->add_option("--threads", threads)->check(CLI::PositiveNumber);

  // rank
  std::string rank_matrix, rank_out;
  double alpha = 0.05;
  auto* rank = app.add_subcommand("rank", "Rank segments by correlation with the whole archive");
  rank->add_option("--matrix", rank_matrix)->required()->check(CLI::ExistingFile);
  rank->add_option("--alpha", alpha)->check(CLI::Range(1e-9, 0.999999));
  rank->add_option("-o,--output", rank_out);

  // proxy-eval
  std::vector<std::string> proxy_matrices;
  std::size_t max_n = 10;
  std::string proxy_out;
  auto* proxy = app.add_subcommand("proxy-eval", "Score proxy segments across properties");
  proxy->add_option("--matrix", proxy_matrices, "NAME=PATH, repeatable")->required();
  proxy->add_option("--max-n", max_n)->check(CLI::Range(1, 100));
  proxy->add_option("-o,--output", proxy_out);

  // lastmod
  std::string lm_input, lm_out, lm_granularity = "year", lm_within;
  CredibilityWindow window;
  AnomalyThresholds thresholds;
  std::size_t offsets_top = 20;
  std::vector<std::int64_t> lm_remove;
  auto* lastmod = app.add_subcommand("lastmod", "Last-Modified analyses over an extraction file");
  lastmod->require_subcommand(1);
  auto add_lm_common = [&](CLI::App* c) {
    c->add_option("--input", lm_input, "Extraction file")->required()->check(CLI::ExistingFile);
    c->add_option("-o,--output", lm_out);
    c->add_option("--floor", window.floor, "Earliest credible POSIX time");
    c->add_option("--max-ahead", window.max_ahead, "Seconds past crawl time still credible");
  };
  auto* lm_extract = lastmod->add_subcommand("extract", "Keep rows with a usable, credible value");
  add_lm_common(lm_extract);
  auto* lm_tabulate = lastmod->add_subcommand("tabulate", "Counts by year, month or day");
  add_lm_common(lm_tabulate);
  lm_tabulate->add_option("--granularity", lm_granularity)->check(CLI::IsMember({"year", "month", "day"}));
  lm_tabulate->add_option("--within", lm_within, "Keep periods with this prefix, e.g. 2023-09");
  auto* lm_offsets = lastmod->add_subcommand("offsets", "Histogram of Last-Modified minus crawl time");
  add_lm_common(lm_offsets);
  lm_offsets->add_option("--top", offsets_top)->check(CLI::PositiveNumber);
  auto* lm_anomaly = lastmod->add_subcommand("anomaly", "Single-value spikes in 10000-second buckets");
  add_lm_common(lm_anomaly);
  lm_anomaly->add_option("--ratio", thresholds.ratio)->check(CLI::PositiveNumber);
  lm_anomaly->add_option("--share", thresholds.share)->check(CLI::Range(0.0, 1.0));
  lm_anomaly->add_option("--ranks", thresholds.ranks_per_year)->check(CLI::PositiveNumber);
  lm_anomaly->add_option("--remove", lm_remove, "Report how many records a value removal drops");

  // urimetrics
  std::string um_input, um_out;
  int min_year = 2000;
  bool drop_outliers = false;
  auto* urim = app.add_subcommand("urimetrics", "Per-year URI component lengths");
  urim->add_option("--input", um_input, "Extraction file")->required()->check(CLI::ExistingFile);
  urim->add_option("--min-year", min_year);
  urim->add_flag("--drop-outlier-domains", drop_outliers);
  urim->add_option("-o,--output", um_out);

  // synth
  std::string synth_spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Write a synthetic archive with ground truth");
  synth->add_option("--spec", synth_spec_path, "JSON spec")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed);
  synth->add_option("-o,--output", synth_out)->required();

  // cache
  SourceOptions cache_src;
  auto* cache = app.add_subcommand("cache", "Manage the local master-index cache");
  cache->require_subcommand(1);
  auto* cache_clear = cache->add_subcommand("clear", "Remove cached files");
  cache_clear->add_option("--cache-dir", cache_src.cache_dir);
  auto* cache_fetch = cache->add_subcommand("fetch", "Download the master index");
  add_source_options(cache_fetch, cache_src);

  // pipeline
  SourceOptions pipe_src;
  std::string pipe_out, pipe_lastmod;
  std::vector<std::string> pipe_features;
  std::size_t top_n = 2;
  auto* pipeline = app.add_subcommand("pipeline", "Run every analysis and write an artifact set");
  add_source_options(pipeline, pipe_src);
  pipeline->add_option("--lastmod", pipe_lastmod, "Extraction file (default: <index-dir>/lastmod.tsv)");
  pipeline->add_option("--feature", pipe_features, "Repeatable; default all")
      ->check(CLI::IsMember({"mime_pair", "language_first", "length_percentile", "lmh_year"}));
  pipeline->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  pipeline->add_option("--top-n", top_n, "Proxy segments reported per basis")->check(CLI::Range(1, 100));
  pipeline->add_option("--alpha", alpha)->check(CLI::Range(1e-9, 0.999999));
  pipeline->add_option("--ratio", thresholds.ratio)->check(CLI::PositiveNumber);
  pipeline->add_option("--share", thresholds.share)->check(CLI::Range(0.0, 1.0));
  pipeline->add_option("--threads", threads)->check(CLI::PositiveNumber);
  pipeline->add_option("-o,--output", pipe_out)->required();

  std::vector<const char*> args(argv, argv + argc);
  try {
    app.parse(argc, args.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!settings.config_path.empty()) {
      std::ifstream cf(settings.config_path);
      if (!cf) throw Error(Errc::InvalidArgument, "cannot read config " + settings.config_path);
      try {
        settings.config = nlohmann::json::parse(cf);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad config: ") + e.what());
      }
      if (!settings.config.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
    }

    if (surt->parsed()) return cmd_surt(surt_uris, out, err, in);

    if (lookup->parsed()) {
      UrlKey key = lookup_is_key ? UrlKey(lookup_uri) : canonicalize(lookup_uri);
      auto idx = open_index(lookup_src, settings);
      LookupCounters counters;
      auto entries = ccseg::lookup(key, idx.master, *idx.shards, &counters);
      for (const auto& e : entries) out << to_line(e) << '\n';
      if (count_ops)
        out << "# master_comparisons: " << counters.master_comparisons
            << "\n# block_comparisons: " << counters.block_comparisons
            << "\n# blocks_read: " << counters.blocks_read << '\n';
      if (entries.empty()) {
        err << "ccseg lookup: no entries for " << key.str() << '\n';
        return kNotFound;
      }
      return kOk;
    }

    if (tabulate->parsed()) {
      auto kind = parse_feature_kind(tab_feature);
      if (!kind) throw Error(Errc::InvalidArgument, "unknown feature " + tab_feature);
      FeatureSpec spec{*kind, top_k};
      ordered_json cfg = {{"command", "tabulate"}, {"feature", tab_feature}, {"top_k", top_k}};
      MergedFeatureTable table;
      std::string archive_id;
      if (*kind == FeatureKind::LmhYear) {
        if (tab_lastmod.empty()) throw Error(Errc::InvalidArgument, "lmh_year needs --lastmod");
        auto li = load_lastmod(tab_lastmod, window);
        Tabulation tab(spec);
        for (const auto& r : li.records) tab.add(r);
        table = build_table(tab);
        cfg["lastmod_sha256"] = li.digest;
        archive_id = tab_src.archive_id.empty() ? "local" : tab_src.archive_id;
      } else {
        auto idx = open_index(tab_src, settings);
        table = build_table(tabulate_index(idx, {spec}, threads).front());
        cfg["master_sha256"] = idx.master_digest;
        archive_id = idx.archive_id;
      }
      emit(tab_out, out, {archive_id, "tabulate", digest_of(cfg)}, [&](std::ostream& o) { write_tsv(table, o); });
      return kOk;
    }

    if (correlate->parsed()) {
      std::string text = read_text(corr_table);
      std::istringstream tin(text);
      auto table = read_tsv(tin);
      auto m = correlation_matrix(table, threads);
      ordered_json cfg = {{"command", "correlate"}, {"table_sha256", sha256_hex(text)}};
      emit(corr_out, out, {"-", "correlate", digest_of(cfg)}, [&](std::ostream& o) { write_tsv(m, o); });
      return kOk;
    }

    if (rank->parsed()) {
      std::string text = read_text(rank_matrix);
      std::istringstream min(text);
      auto ranking = rank_segments(read_correlation_tsv(min), alpha);
      ordered_json cfg = {{"command", "rank"}, {"alpha", alpha}, {"matrix_sha256", sha256_hex(text)}};
      emit(rank_out, out, {"-", "rank", digest_of(cfg)}, [&](std::ostream& o) { write_tsv(ranking, o); });
      return kOk;
    }

    if (proxy->parsed()) {
      std::vector<std::pair<std::string, CorrelationMatrix>> mats;
      ordered_json cfg = {{"command", "proxy-eval"}, {"max_n", max_n}, {"matrices", ordered_json::array()}};
      for (const auto& spec : proxy_matrices) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
          throw Error(Errc::InvalidArgument, "--matrix expects NAME=PATH, got " + spec);
        std::string text = read_text(spec.substr(eq + 1));
        std::istringstream min(text);
        mats.emplace_back(spec.substr(0, eq), read_correlation_tsv(min));
        cfg["matrices"].push_back({{"name", spec.substr(0, eq)}, {"sha256", sha256_hex(text)}});
      }
      std::vector<ProxyHeatmap> rows;
      for (const auto& [bn, b] : mats)
        for (const auto& [tn, t] : mats) rows.push_back(proxy_eval(b, t, max_n, bn, tn));
      emit(proxy_out, out, {"-", "proxy-eval", digest_of(cfg)}, [&](std::ostream& o) { write_tsv(rows, o); });
      return kOk;
    }

    if (lastmod->parsed()) {
      auto li = load_lastmod(lm_input, window);
      ordered_json cfg = {{"floor", window.floor}, {"max_ahead", window.max_ahead}, {"input_sha256", li.digest}};
      if (lm_extract->parsed()) {
        cfg["command"] = "lastmod extract";
        emit(lm_out, out, {"-", "lastmod extract", digest_of(cfg)}, [&](std::ostream& o) {
          write_stats(o, li.stats);
          for (auto i : li.row_of_record) o << to_line(li.rows[i]) << '\n';
        });
      } else if (lm_tabulate->parsed()) {
        cfg["command"] = "lastmod tabulate";
        cfg["granularity"] = lm_granularity;
        cfg["within"] = lm_within;
        auto rows = filter_prefix(tabulate_period(li.records, *parse_granularity(lm_granularity)), lm_within);
        emit(lm_out, out, {"-", "lastmod tabulate", digest_of(cfg)}, [&](std::ostream& o) {
          write_stats(o, li.stats);
          write_periods(o, rows);
        });
      } else if (lm_offsets->parsed()) {
        cfg["command"] = "lastmod offsets";
        cfg["top"] = offsets_top;
        auto h = offsets(li.records);
        emit(lm_out, out, {"-", "lastmod offsets", digest_of(cfg)},
             [&](std::ostream& o) { write_offsets(o, h, offsets_top); });
      } else {
        cfg["command"] = "lastmod anomaly";
        cfg["ratio"] = thresholds.ratio;
        cfg["share"] = thresholds.share;
        cfg["ranks_per_year"] = thresholds.ranks_per_year;
        auto reports = detect_anomalies(li.records, thresholds);
        emit(lm_out, out, {"-", "lastmod anomaly", digest_of(cfg)}, [&](std::ostream& o) {
          write_anomalies(o, reports);
          for (auto v : lm_remove) {
            std::size_t removed = remove_value(li.records, v);
            o << "# removed " << v << ": " << removed << " of " << li.stats.accepted << '\n';
          }
        });
      }
      return kOk;
    }

    if (urim->parsed()) {
      auto li = load_lastmod(um_input, window);
      std::uint64_t skipped = 0;
      auto samples = year_metrics(li, skipped);
      std::vector<std::string> dropped;
      if (drop_outliers) dropped = drop_outlier_domains(samples);
      auto means = aggregate_by_year(samples, min_year);
      ordered_json cfg = {{"command", "urimetrics"}, {"min_year", min_year},
                          {"drop_outlier_domains", drop_outliers}, {"input_sha256", li.digest}};
      emit(um_out, out, {"-", "urimetrics", digest_of(cfg)}, [&](std::ostream& o) {
        o << "# not_absolute: " << skipped << '\n';
        for (const auto& h : dropped) o << "# dropped_domain: " << h << '\n';
        write_tsv(means, o);
      });
      return kOk;
    }

    if (synth->parsed()) {
      SynthSpec spec;
      if (!synth_spec_path.empty()) {
        std::ifstream sf(synth_spec_path);
        try {
          spec = synth_spec_from_json(nlohmann::json::parse(sf));
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::InvalidSpec, e.what());
        }
      }
      if (synth_seed) spec.seed = *synth_seed;
      auto archive = generate(spec);
      write_archive(archive, spec, synth_out);
      out << "wrote " << archive.lines.size() << " index lines to " << synth_out << '\n';
      return kOk;
    }

    if (cache->parsed()) {
      if (cache_clear->parsed()) {
        auto removed = clear_cache(resolve_cache_dir(cache_src, settings));
        out << "removed " << removed << " files\n";
      } else {
        if (cache_src.base_url.empty())
          cache_src.base_url = env_or("CCSEG_BASE_URL", config_string(settings, "base_url"));
        if (cache_src.base_url.empty()) throw Error(Errc::InvalidArgument, "cache fetch needs --base-url");
        auto idx = open_index(cache_src, settings);
        out << idx.master.size() << " master lines, sha256 " << idx.master_digest << '\n';
      }
      return kOk;
    }

    if (pipeline->parsed()) {
      std::vector<std::string> features = pipe_features;
      if (features.empty()) features = {"mime_pair", "language_first", "length_percentile", "lmh_year"};
      std::sort(features.begin(), features.end());
      features.erase(std::unique(features.begin(), features.end()), features.end());

      auto idx = open_index(pipe_src, settings);
      fs::path lm_path = pipe_lastmod;
      if (lm_path.empty() && !idx.local_dir.empty() && fs::exists(idx.local_dir / "lastmod.tsv"))
        lm_path = idx.local_dir / "lastmod.tsv";
      std::optional<LastModInput> li;
      if (!lm_path.empty()) li = load_lastmod(lm_path, window);

      ordered_json cfg = {{"command", "pipeline"},
                          {"archive_id", idx.archive_id},
                          {"features", features},
                          {"top_k", top_k},
                          {"top_n", top_n},
                          {"alpha", alpha},
                          {"credibility", {{"floor", window.floor}, {"max_ahead", window.max_ahead}}},
                          {"anomaly", {{"ratio", thresholds.ratio}, {"share", thresholds.share},
                                       {"ranks_per_year", thresholds.ranks_per_year}}},
                          {"inputs", {{"cluster.idx", idx.master_digest}}}};
      if (li) cfg["inputs"]["lastmod"] = li->digest;
      const Provenance prov{idx.archive_id, "pipeline", digest_of(cfg)};
      const fs::path root(pipe_out);
      fs::create_directories(root);

      ordered_json stages = ordered_json::array();
      bool failed = false;
      auto stage = [&](const std::string& name, const std::function<void(ordered_json&)>& body) {
        ordered_json s = {{"stage", name}, {"status", "ok"}, {"artifacts", ordered_json::object()}};
        try {
          body(s["artifacts"]);
        } catch (const std::exception& e) {
          s["status"] = "failed";
          s["error"] = e.what();
          failed = true;
          err << "ccseg pipeline: stage " << name << " failed: " << e.what() << '\n';
        }
        stages.push_back(std::move(s));
      };
      auto artifact = [&](ordered_json& list, const std::string& rel, const std::function<void(std::ostream&)>& body,
                          const std::string& feature = {}) {
        ordered_json meta = {{"archive_id", idx.archive_id}};
        if (!feature.empty()) {
          meta["feature"] = feature;
          meta["top_k"] = top_k;
        }
        meta["sha256"] = emit((root / rel).string(), out, prov, body);
        list[rel] = std::move(meta);
      };

      std::map<std::string, MergedFeatureTable> tables;
      std::vector<FeatureSpec> index_specs;
      std::vector<std::string> index_names;
      for (const auto& f : features) {
        if (f == "lmh_year") continue;
        index_specs.push_back({*parse_feature_kind(f), top_k});
        index_names.push_back(f);
      }
      stage("features", [&](ordered_json& arts) {
        if (!index_specs.empty()) {
          auto tabs = tabulate_index(idx, index_specs, threads);
          for (std::size_t k = 0; k < tabs.size(); ++k) tables[index_names[k]] = build_table(tabs[k]);
        }
        if (std::count(features.begin(), features.end(), "lmh_year")) {
          if (!li) throw Error(Errc::EmptyInput, "lmh_year needs an extraction file");
          Tabulation tab({FeatureKind::LmhYear, top_k});
          for (const auto& r : li->records) tab.add(r);
          tables["lmh_year"] = build_table(tab);
        }
        for (const auto& [name, t] : tables)
          artifact(arts, "features/" + name + ".tsv", [&](std::ostream& o) { write_tsv(t, o); }, name);
      });

      std::vector<std::pair<std::string, CorrelationMatrix>> mats;
      std::vector<std::pair<std::string, SegmentRanking>> rankings;
      stage("correlations", [&](ordered_json& arts) {
        for (const auto& [name, t] : tables) {
          mats.emplace_back(name, correlation_matrix(t, threads));
          artifact(arts, "correlations/" + name + ".tsv", [&](std::ostream& o) { write_tsv(mats.back().second, o); }, name);
        }
      });
      stage("rankings", [&](ordered_json& arts) {
        for (const auto& [name, m] : mats) {
          rankings.emplace_back(name, rank_segments(m, alpha));
          artifact(arts, "rankings/" + name + ".tsv", [&](std::ostream& o) { write_tsv(rankings.back().second, o); }, name);
        }
        if (!rankings.empty())
          artifact(arts, "rankings/columns.tsv", [&](std::ostream& o) { write_rank_columns(rankings, 100, o); });
      });

      ordered_json selection = ordered_json::object();
      stage("proxy", [&](ordered_json& arts) {
        if (mats.empty()) return;
        std::vector<ProxyHeatmap> rows;
        for (const auto& [bn, b] : mats)
          for (const auto& [tn, t] : mats) rows.push_back(proxy_eval(b, t, std::max<std::size_t>(10, top_n), bn, tn));
        artifact(arts, "proxy/heatmap.tsv", [&](std::ostream& o) {
          auto [mean, sd] = pooled_mean_sd(rows);
          o << "# pooled_mean: " << fmt_fixed(mean, 3) << "\n# pooled_sd: " << fmt_fixed(sd, 3) << '\n';
          write_tsv(rows, o);
        });
        artifact(arts, "proxy/selection.tsv", [&](std::ostream& o) { write_selection(o, mats, top_n); });
        for (const auto& h : rows)
          if (h.basis == h.target) selection[h.basis] = h.chosen.at(top_n - 1);
      });

      if (li) {
        stage("lastmod", [&](ordered_json& arts) {
          artifact(arts, "lastmod/stats.tsv", [&](std::ostream& o) {
            o << "measure\tcount\n"
              << "total\t" << li->stats.total << "\nabsent\t" << li->stats.absent << "\naccepted\t"
              << li->stats.accepted << "\nrejected_unusable\t" << li->stats.rejected_unusable
              << "\nrejected_incredible\t" << li->stats.rejected_incredible << '\n';
          });
          const std::pair<const char*, Granularity> grains[] = {
              {"year", Granularity::Year}, {"month", Granularity::Month}, {"day", Granularity::Day}};
          for (const auto& [gname, g] : grains) {
            auto rows = tabulate_period(li->records, g);
            artifact(arts, std::string("lastmod/") + gname + ".tsv", [&](std::ostream& o) { write_periods(o, rows); });
          }
          auto h = offsets(li->records);
          artifact(arts, "lastmod/offsets.tsv", [&](std::ostream& o) { write_offsets(o, h, 20); });
          auto reports = detect_anomalies(li->records, thresholds);
          artifact(arts, "lastmod/anomalies.tsv", [&](std::ostream& o) {
            write_anomalies(o, reports);
            auto kept = li->records;
            for (const auto& r : reports) {
              std::size_t removed = remove_value(kept, r.dominant_value);
              o << "# removed " << r.dominant_value << ": " << removed << " of " << li->stats.accepted << '\n';
            }
          });
        });
        stage("urimetrics", [&](ordered_json& arts) {
          std::uint64_t skipped = 0;
          auto samples = year_metrics(*li, skipped);
          artifact(arts, "urimetrics/by_year.tsv", [&](std::ostream& o) {
            o << "# not_absolute: " << skipped << '\n';
            write_tsv(aggregate_by_year(samples), o);
          });
          auto dropped = drop_outlier_domains(samples);
          artifact(arts, "urimetrics/by_year_filtered.tsv", [&](std::ostream& o) {
            for (const auto& d : dropped) o << "# dropped_domain: " << d << '\n';
            write_tsv(aggregate_by_year(samples), o);
          });
        });
      }

      ordered_json manifest = {{"tool", "ccseg"},
                               {"version", kVersion},
                               {"archive_id", idx.archive_id},
                               {"config_digest", prov.config_digest},
                               {"config", cfg},
                               {"proxy_selection", selection},
                               {"stages", stages},
                               {"status", failed ? "partial" : "ok"}};
      {
        std::ofstream mf(root / "manifest.json", std::ios::binary | std::ios::trunc);
        mf << manifest.dump(2) << '\n';
      }
      for (const auto& [basis, ids] : selection.items()) {
        out << "proxy\t" << basis << '\t';
        for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i].get<int>();
        out << '\n';
      }
      return failed ? kIntegrity : kOk;
    }
  } catch (const Error& e) {
    err << "ccseg: " << e.what() << '\n';
    return exit_code_of(e.code());
  } catch (const std::exception& e) {
    err << "ccseg: " << e.what() << '\n';
    return kIntegrity;
  }
  return kUsage;
}

}  // namespace ccseg::cli
