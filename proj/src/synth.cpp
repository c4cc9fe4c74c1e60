#include "ccseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "ccseg/error.hpp"
#include "ccseg/features.hpp"
#include "ccseg/gzip.hpp"
#include "ccseg/surt.hpp"
#include "ccseg/timeutil.hpp"

namespace ccseg {

namespace fs = std::filesystem;

double SynthRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t SynthRng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // rejection sampling keeps the draw unbiased
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do v = engine_();
  while (v >= limit);
  return v % n;
}

double SynthRng::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t SynthRng::categorical(const std::vector<double>& cumulative) {
  double u = uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<MimePairSpec> mime_catalog(std::size_t n) {
  std::vector<MimePairSpec> c = {
      {"text/html", "text/html"},
      {"text/html", "application/xhtml+xml"},
      {"", "text/html"},
      {"application/atom+xml", "application/atom+xml"},
      {"application/pdf", "application/pdf"},
      {"image/jpeg", "image/jpeg"},
      {"", "application/xhtml+xml"},
      {"application/rss+xml", "application/rss+xml"},
      {"text/xml", "application/rss+xml"},
      {"text/plain", "text/plain"},
      {"text/plain", "application/mbox"},
      {"application/octet-stream", "application/x-tika-msoffice"},
      {"application/octet-stream", "text/x-log"},
  };
  for (std::size_t i = c.size(); c.size() < n; ++i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "application/x-synth-%03zu", i);
    c.push_back({buf, i % 3 == 0 ? "application/octet-stream" : buf});
  }
  c.resize(n);
  return c;
}

std::vector<std::string> language_catalog(std::size_t n) {
  std::vector<std::string> c = {"eng", "rus", "deu", "jpn", "zho", "spa", "fra", "por", "ita",
                                "pol", "nld", "ces", "tur", "vie", "ind", "kor", "swe", "fas",
                                "ukr", "hun", "ron", "dan", "ell", "fin", "nor", "slk", "tha",
                                "bul", "heb", "hrv", "srp", "lit", "slv", "cat", "est", "lav"};
  // qaa..qtz are reserved for local use, so they never collide with real codes
  for (char a = 'a'; c.size() < n && a <= 't'; ++a)
    for (char b = 'a'; c.size() < n && b <= 'z'; ++b) c.push_back(std::string("q") + a + b);
  c.resize(n);
  return c;
}

namespace {

std::vector<double> zipf(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

// (1-d)*p + d*reverse(p): mass moves from the head to the tail.
std::vector<double> perturb(const std::vector<double>& p, double d) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (1 - d) * p[i] + d * p[p.size() - 1 - i];
  return out;
}

double divergence_of(const SynthSpec& spec, int seg) {
  for (const auto& p : spec.perturbed)
    if (p.segment_id == seg) return p.divergence;
  return 0.0;
}

std::size_t segment_size(const SynthSpec& spec, int seg) {
  double f = 1.0;
  for (const auto& b : spec.boosted)
    if (b.segment_id == seg) f = b.size_factor;
  return static_cast<std::size_t>(std::llround(static_cast<double>(spec.entries_per_segment) * f));
}

constexpr const char* kTlds[] = {"com", "org", "net", "de", "ru", "co.uk", "fr", "xn--p1ai", "jp", "io"};
constexpr std::int64_t kZoneHours[] = {-5, -4, -1, 1, 2};

std::string base32_digest(SynthRng& rng) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";
  std::string d(32, 'A');
  for (auto& c : d) c = kAlphabet[rng.below(32)];
  return d;
}

std::string rfc850_date(std::int64_t posix) {
  static constexpr const char* kDays[] = {"Thursday", "Friday", "Saturday", "Sunday",
                                          "Monday",   "Tuesday", "Wednesday"};
  static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  CivilTime t = from_posix(posix);
  std::int64_t days = posix / 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s, %02u-%s-%02d %02u:%02u:%02u GMT", kDays[days % 7], t.day,
                kMonths[t.month - 1], t.year % 100, t.hour, t.minute, t.second);
  return buf;
}

std::string asctime_date(std::int64_t posix) {
  static constexpr const char* kDays[] = {"Thu", "Fri", "Sat", "Sun", "Mon", "Tue", "Wed"};
  static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  CivilTime t = from_posix(posix);
  std::int64_t days = posix / 86400;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %s %2u %02u:%02u:%02u %04d", kDays[days % 7],
                kMonths[t.month - 1], t.day, t.hour, t.minute, t.second, t.year);
  return buf;
}

std::int64_t year_start(int year) { return to_posix(CivilTime{year, 1, 1, 0, 0, 0}); }

struct Draft {
  IndexEntry entry;
  std::string raw_lm;  // warc entries only
  bool warc = true;
};

}  // namespace

void validate(const SynthSpec& spec) {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidSpec, why); };
  if (spec.n_segments < 1 || spec.n_segments > 100) bad("n_segments must be in 1..100");
  if (spec.entries_per_segment == 0) bad("entries_per_segment must be positive");
  if (spec.mime_labels < 3 || spec.language_labels < 3) bad("catalogs need at least 3 labels");
  if (spec.block_lines == 0) bad("block_lines must be positive");
  if (spec.n_shards < 1 || spec.n_shards > 300) bad("n_shards must be in 1..300");
  if (spec.crawl_days < 1) bad("crawl_days must be positive");
  if (!spec.mime_weights.empty()) {
    if (spec.mime_weights.size() != spec.mime_labels) bad("mime_weights size != mime_labels");
    double sum = 0;
    for (double w : spec.mime_weights) {
      if (!(w >= 0)) bad("negative mime weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("mime_weights must sum to 1");
  }
  std::set<int> seen;
  for (const auto& p : spec.perturbed) {
    if (p.segment_id < 0 || p.segment_id >= spec.n_segments) bad("perturbed segment id out of range");
    if (!(p.divergence > 0 && p.divergence <= 1)) bad("divergence must be in (0, 1]");
    if (!seen.insert(p.segment_id).second) bad("segment perturbed twice");
  }
  for (const auto& b : spec.boosted) {
    if (b.segment_id < 0 || b.segment_id >= spec.n_segments) bad("boosted segment id out of range");
    if (!(b.size_factor > 0)) bad("size_factor must be positive");
  }
  const auto& lm = spec.lastmod;
  for (double s : {lm.presence, lm.zero_offset_share, lm.near_offset_share, lm.zone_offset_share,
                   lm.unusable_share, lm.incredible_share})
    if (!(s >= 0 && s <= 1)) bad("last-modified shares must be in [0, 1]");
  if (lm.zero_offset_share + lm.near_offset_share + lm.zone_offset_share > 1)
    bad("last-modified offset shares exceed 1");
  if (lm.first_year < 1990 || lm.first_year > utc_year(spec.crawl_start))
    bad("first_year must lie between 1990 and the crawl year");
}

std::vector<double> base_mime_distribution(const SynthSpec& spec) {
  return spec.mime_weights.empty() ? zipf(spec.mime_labels, spec.zipf_exponent) : spec.mime_weights;
}

std::vector<double> segment_mime_distribution(const SynthSpec& spec, int segment_id) {
  double d = divergence_of(spec, segment_id);
  auto base = base_mime_distribution(spec);
  return d > 0 ? perturb(base, d) : base;
}

std::vector<double> whole_mime_distribution(const SynthSpec& spec) {
  std::vector<double> whole(spec.mime_labels, 0.0);
  double total = 0;
  for (int s = 0; s < spec.n_segments; ++s) {
    auto n = static_cast<double>(segment_size(spec, s));
    auto p = segment_mime_distribution(spec, s);
    for (std::size_t i = 0; i < whole.size(); ++i) whole[i] += n * p[i];
    total += n;
  }
  for (auto& w : whole) w /= total;
  return whole;
}

SynthArchive generate(const SynthSpec& spec) {
  validate(spec);
  SynthRng rng(spec.seed);

  const auto mimes = mime_catalog(spec.mime_labels);
  const auto langs = language_catalog(spec.language_labels);
  const auto base_lang = zipf(spec.language_labels, spec.zipf_exponent);
  const int crawl_year = utc_year(spec.crawl_start);
  const std::int64_t crawl_span = spec.crawl_days * 86400;

  std::vector<double> year_weights;
  for (int y = spec.lastmod.first_year; y <= crawl_year; ++y)
    year_weights.push_back(std::pow(spec.lastmod.yearly_growth, y - spec.lastmod.first_year));
  const auto year_cum = cumulative(year_weights);

  std::vector<Draft> drafts;
  std::vector<std::size_t> warc_index;
  for (int seg = 0; seg < spec.n_segments; ++seg) {
    const double d = divergence_of(spec, seg);
    const auto mime_cum = cumulative(segment_mime_distribution(spec, seg));
    const auto lang_cum = cumulative(d > 0 ? perturb(base_lang, d) : base_lang);
    char prefix[64];
    std::snprintf(prefix, sizeof prefix, "crawl-data/%s/segments/%lld.%02d/",
                  spec.archive_id.c_str(), 1695233505000LL + seg * 1000LL, seg);

    const std::size_t n = segment_size(spec, seg);
    for (std::size_t i = 0; i < n; ++i) {
      std::string host = "site" + std::to_string(rng.below(5000)) + "." + kTlds[rng.below(10)];
      std::string path = "/p" + std::to_string(seg) + "/" + std::to_string(i);
      if (rng.uniform() < 0.3) path += "/doc%20" + std::to_string(rng.below(100)) + ".html";
      if (rng.uniform() < 0.2) path += "?id=" + std::to_string(rng.below(100000)) + "&q=a%2Fb";
      std::string url = std::string("https://") + (rng.uniform() < 0.5 ? "www." : "") + host + path;
      const std::int64_t crawl = spec.crawl_start + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(crawl_span)));
      const std::string ts = format_timestamp14(crawl);

      Draft w;
      IndexEntry& e = w.entry;
      e.urlkey = canonicalize(url);
      e.timestamp14 = ts;
      e.url = url;
      const auto& mp = mimes[rng.categorical(mime_cum)];
      if (!mp.mime.empty()) e.mime = mp.mime;
      e.mime_detected = mp.detected;
      e.status = 200;
      e.digest = base32_digest(rng);
      double mu = 9.0 + 1.5 * d;
      e.length = std::max<std::uint64_t>(
          200, static_cast<std::uint64_t>(std::llround(std::exp(mu + 1.2 * rng.normal()))));
      e.offset = rng.below(1ULL << 30);
      char file[96];
      std::snprintf(file, sizeof file, "warc/%s-%s-%05llu.warc.gz", spec.archive_id.c_str(),
                    ts.c_str(), static_cast<unsigned long long>(rng.below(900)));
      e.filename = prefix + std::string(file);
      const bool html = mp.detected == "text/html" || mp.detected == "application/xhtml+xml";
      if (html) {
        e.charset = "UTF-8";
        if (rng.uniform() < 0.95) {
          e.languages.push_back(langs[rng.categorical(lang_cum)]);
          if (rng.uniform() < 0.2) {
            const auto& second = langs[rng.below(langs.size())];
            if (second != e.languages.front()) e.languages.push_back(second);
          }
        }
      }
      e.field_order = {"url", "mime", "mime-detected", "status", "digest", "length", "offset", "filename"};
      if (mp.mime.empty()) e.field_order.erase(e.field_order.begin() + 1);
      if (e.charset) e.field_order.push_back("charset");
      if (!e.languages.empty()) e.field_order.push_back("languages");

      // Last-Modified
      const auto& lm = spec.lastmod;
      if (rng.uniform() < lm.presence) {
        double u = rng.uniform();
        std::int64_t value;
        if (u < lm.zero_offset_share) {
          value = crawl;
        } else if (u < lm.zero_offset_share + lm.near_offset_share) {
          std::int64_t off = static_cast<std::int64_t>(rng.below(6)) - 3;
          value = crawl + (off >= 0 ? off + 1 : off);
        } else if (u < lm.zero_offset_share + lm.near_offset_share + lm.zone_offset_share) {
          value = crawl + kZoneHours[rng.below(5)] * 3600;
        } else {
          int y = lm.first_year + static_cast<int>(rng.categorical(year_cum));
          std::int64_t from = year_start(y);
          std::int64_t to = y == crawl_year ? crawl : year_start(y + 1);
          value = from + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(1, to - from))));
        }
        double form = rng.uniform();
        double junk = rng.uniform();
        if (junk < lm.unusable_share) {
          w.raw_lm = "last tuesday-ish";
        } else if (junk < lm.unusable_share + lm.incredible_share) {
          w.raw_lm = rng.uniform() < 0.5 ? "Thu, 01 Jan 1970 00:00:00 GMT"
                                         : format_http_date(crawl + 86400 * 400);
        } else if (form < 0.9) {
          w.raw_lm = format_http_date(value);
        } else if (form < 0.95 && utc_year(value) >= 1970 && utc_year(value) < 2070) {
          w.raw_lm = rfc850_date(value);
        } else {
          w.raw_lm = asctime_date(value);
        }
      }
      if (rng.uniform() < spec.redirect_share) {
        Draft r;
        IndexEntry& re = r.entry;
        re = e;
        re.url = "http://" + url.substr(8);
        re.mime = "text/html";
        re.mime_detected = "text/html";
        re.status = 301;
        re.digest = base32_digest(rng);
        re.length = 400 + rng.below(600);
        re.charset.reset();
        re.languages.clear();
        re.redirect = url;
        std::snprintf(file, sizeof file, "crawldiagnostics/%s-%s-%05llu.warc.gz",
                      spec.archive_id.c_str(), ts.c_str(),
                      static_cast<unsigned long long>(rng.below(900)));
        re.filename = prefix + std::string(file);
        re.field_order = {"url", "mime", "mime-detected", "status", "digest",
                          "length", "offset", "filename", "redirect"};
        r.warc = false;
        drafts.push_back(std::move(r));
      }
      warc_index.push_back(drafts.size());
      drafts.push_back(std::move(w));
    }
  }

  // Anomalies overwrite the header of randomly chosen warc entries.
  std::uint64_t injected = 0;
  for (const auto& a : spec.anomalies) injected += a.count;
  if (injected > warc_index.size()) throw Error(Errc::InvalidSpec, "more injections than warc entries");
  std::size_t cursor = 0;
  for (const auto& a : spec.anomalies) {
    for (std::uint64_t k = 0; k < a.count; ++k, ++cursor) {
      std::size_t pick = cursor + static_cast<std::size_t>(rng.below(warc_index.size() - cursor));
      std::swap(warc_index[cursor], warc_index[pick]);
      drafts[warc_index[cursor]].raw_lm = format_http_date(a.lm_posix);
    }
  }

  SynthArchive out;
  std::vector<std::pair<std::string, std::size_t>> order;
  order.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) order.emplace_back(to_line(drafts[i].entry), i);
  std::sort(order.begin(), order.end());
  for (auto& [line, idx] : order) {
    const Draft& d = drafts[idx];
    if (d.warc)
      out.lastmod.push_back(ExtractionRow{d.entry.urlkey.str(), d.entry.timestamp14,
                                          d.raw_lm.empty() ? "-" : d.raw_lm, d.entry.url,
                                          d.entry.filename});
    out.lines.push_back(std::move(line));
  }

  auto& m = out.manifest;
  m["generator"] = "ccseg synth";
  m["seed"] = spec.seed;
  m["archive_id"] = spec.archive_id;
  m["n_segments"] = spec.n_segments;
  m["entries_per_segment"] = spec.entries_per_segment;
  m["index_lines"] = out.lines.size();
  m["warc_entries"] = out.lastmod.size();
  m["block_lines"] = spec.block_lines;
  m["n_shards"] = spec.n_shards;
  std::vector<int> worst, best;
  nlohmann::ordered_json perturbed = nlohmann::ordered_json::array();
  for (const auto& p : spec.perturbed) {
    perturbed.push_back({{"segment", p.segment_id}, {"divergence", p.divergence}});
    worst.push_back(p.segment_id);
  }
  nlohmann::ordered_json boosted = nlohmann::ordered_json::array();
  for (const auto& b : spec.boosted) {
    boosted.push_back({{"segment", b.segment_id}, {"size_factor", b.size_factor}});
    best.push_back(b.segment_id);
  }
  std::sort(worst.begin(), worst.end());
  std::sort(best.begin(), best.end());
  m["perturbed"] = perturbed;
  m["boosted"] = boosted;
  m["planted_worst"] = worst;
  m["planted_best"] = best;
  nlohmann::ordered_json anomalies = nlohmann::ordered_json::array();
  for (const auto& a : spec.anomalies) anomalies.push_back({{"lm_posix", a.lm_posix}, {"count", a.count}});
  m["anomalies"] = anomalies;
  nlohmann::ordered_json dist = nlohmann::ordered_json::array();
  auto base = base_mime_distribution(spec);
  for (std::size_t i = 0; i < mimes.size(); ++i) {
    IndexEntry probe;
    if (!mimes[i].mime.empty()) probe.mime = mimes[i].mime;
    probe.mime_detected = mimes[i].detected;
    dist.push_back({{"label", mime_pair_label(probe)}, {"p", base[i]}});
  }
  m["base_mime_distribution"] = dist;
  nlohmann::ordered_json ldist = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < langs.size(); ++i) ldist.push_back({{"label", langs[i]}, {"p", base_lang[i]}});
  m["base_language_distribution"] = ldist;
  return out;
}

void write_archive(const SynthArchive& archive, const SynthSpec& spec, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& lines = archive.lines;
  const std::size_t per_shard = (lines.size() + static_cast<std::size_t>(spec.n_shards) - 1) /
                                static_cast<std::size_t>(spec.n_shards);

  // advance `end` past any run of lines sharing the urlkey of line end-1
  auto extend_run = [&](std::size_t end) {
    while (end < lines.size() && end > 0 && urlkey_of_line(lines[end]) == urlkey_of_line(lines[end - 1])) ++end;
    return end;
  };

  std::ofstream master(dir / "cluster.idx", std::ios::binary | std::ios::trunc);
  if (!master) throw Error(Errc::Io, "cannot write " + (dir / "cluster.idx").string());
  std::size_t pos = 0;
  std::uint64_t seq = 0;
  for (int shard = 0; shard < spec.n_shards; ++shard) {
    char name[32];
    std::snprintf(name, sizeof name, "cdx-%05d.gz", shard);
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, std::string("cannot write ") + name);
    const std::size_t shard_end =
        shard + 1 == spec.n_shards ? lines.size() : extend_run(std::min(lines.size(), pos + per_shard));
    std::uint64_t offset = 0;
    while (pos < shard_end) {
      std::size_t end = extend_run(std::min(shard_end, pos + spec.block_lines));
      std::string text;
      for (std::size_t i = pos; i < end; ++i) {
        text += lines[i];
        text.push_back('\n');
      }
      std::string member = gzip_member(text);
      out.write(member.data(), static_cast<std::streamsize>(member.size()));

      MasterIndexLine ml;
      auto first = std::string_view(lines[pos]);
      ml.first_urlkey = UrlKey(std::string(urlkey_of_line(first)));
      auto rest = first.substr(ml.first_urlkey.str().size() + 1);
      ml.timestamp14 = std::string(rest.substr(0, rest.find(' ')));
      ml.shard_name = name;
      ml.block_offset = offset;
      ml.block_length = member.size();
      ml.sequence = ++seq;
      master << to_line(ml) << '\n';
      offset += member.size();
      pos = end;
    }
  }

  std::ofstream lm(dir / "lastmod.tsv", std::ios::binary | std::ios::trunc);
  for (const auto& row : archive.lastmod) lm << to_line(row) << '\n';
  std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  manifest << archive.manifest.dump(2) << '\n';
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("seed", s.seed);
    get("archive_id", s.archive_id);
    get("n_segments", s.n_segments);
    get("entries_per_segment", s.entries_per_segment);
    get("mime_labels", s.mime_labels);
    get("language_labels", s.language_labels);
    get("zipf_exponent", s.zipf_exponent);
    get("mime_weights", s.mime_weights);
    get("redirect_share", s.redirect_share);
    get("crawl_start", s.crawl_start);
    get("crawl_days", s.crawl_days);
    get("block_lines", s.block_lines);
    get("n_shards", s.n_shards);
    if (j.contains("perturbed"))
      for (const auto& p : j.at("perturbed"))
        s.perturbed.push_back({p.at("segment").get<int>(), p.value("divergence", 0.3)});
    if (j.contains("boosted"))
      for (const auto& b : j.at("boosted"))
        s.boosted.push_back({b.at("segment").get<int>(), b.value("size_factor", 10.0)});
    if (j.contains("anomalies"))
      for (const auto& a : j.at("anomalies"))
        s.anomalies.push_back({a.at("lm_posix").get<std::int64_t>(), a.at("count").get<std::uint64_t>()});
    if (j.contains("lastmod")) {
      const auto& l = j.at("lastmod");
      s.lastmod.presence = l.value("presence", s.lastmod.presence);
      s.lastmod.zero_offset_share = l.value("zero_offset_share", s.lastmod.zero_offset_share);
      s.lastmod.near_offset_share = l.value("near_offset_share", s.lastmod.near_offset_share);
      s.lastmod.zone_offset_share = l.value("zone_offset_share", s.lastmod.zone_offset_share);
      s.lastmod.first_year = l.value("first_year", s.lastmod.first_year);
      s.lastmod.yearly_growth = l.value("yearly_growth", s.lastmod.yearly_growth);
      s.lastmod.unusable_share = l.value("unusable_share", s.lastmod.unusable_share);
      s.lastmod.incredible_share = l.value("incredible_share", s.lastmod.incredible_share);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidSpec, e.what());
  }
  validate(s);
  return s;
}

}  // namespace ccseg
