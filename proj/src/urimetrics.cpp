#include "ccseg/urimetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ostream>

#include "ccseg/error.hpp"

namespace ccseg {

namespace {

// UTF-8 code points; continuation bytes are not counted.
std::size_t char_count(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

void count_pct(std::string_view s, std::size_t& valid, std::size_t& stray) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') continue;
    if (i + 2 < s.size() && is_hex(s[i + 1]) && is_hex(s[i + 2])) {
      ++valid;
      i += 2;
    } else {
      ++stray;
    }
  }
}

bool scheme_char(char c, bool first) {
  if (std::isalpha(static_cast<unsigned char>(c))) return true;
  return !first && (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.');
}

}  // namespace

UriMetrics measure(std::string_view uri) {
  if (auto hash = uri.find('#'); hash != std::string_view::npos) uri = uri.substr(0, hash);
  auto colon = uri.find("://");
  if (colon == std::string_view::npos || colon == 0)
    throw Error(Errc::NotAbsolute, "no scheme:// in '" + std::string(uri) + "'");
  for (std::size_t i = 0; i < colon; ++i)
    if (!scheme_char(uri[i], i == 0))
      throw Error(Errc::NotAbsolute, "bad scheme in '" + std::string(uri) + "'");

  std::string_view rest = uri.substr(colon + 3);
  auto netloc_end = rest.find_first_of("/?");
  if (netloc_end == std::string_view::npos) netloc_end = rest.size();
  std::string_view netloc = rest.substr(0, netloc_end);
  std::string_view tail = rest.substr(netloc_end);
  std::string_view path = tail, query;
  if (auto q = tail.find('?'); q != std::string_view::npos) {
    path = tail.substr(0, q);
    query = tail.substr(q + 1);
  }

  UriMetrics m;
  m.total_len = char_count(uri);
  m.scheme_len = char_count(uri.substr(0, colon));
  m.netloc_len = char_count(netloc);
  m.path_len = char_count(path);
  m.query_len = char_count(query);

  std::string_view hostport = netloc;
  if (auto at = hostport.rfind('@'); at != std::string_view::npos) hostport.remove_prefix(at + 1);
  std::string_view host = hostport;
  if (!host.starts_with('[')) {
    if (auto c = host.rfind(':'); c != std::string_view::npos) host = host.substr(0, c);
  }
  m.host.reserve(host.size());
  for (char c : host) m.host.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::string_view h = m.host;
  for (std::size_t start = 0; start <= h.size();) {
    auto dot = h.find('.', start);
    if (dot == std::string_view::npos) dot = h.size();
    if (h.substr(start, dot - start).starts_with("xn--")) m.idna = true;
    start = dot + 1;
  }

  if (!path.empty()) {
    std::size_t valid = 0;
    count_pct(path, valid, m.stray_pct);
    m.path_pct = valid;
  }
  if (!query.empty()) {
    std::size_t valid = 0;
    count_pct(query, valid, m.stray_pct);
    m.query_pct = valid;
  }
  return m;
}

std::vector<YearMeans> aggregate_by_year(std::span<const YearMetric> samples, int min_year) {
  struct Acc {
    std::size_t n = 0, n_path = 0, n_query = 0, idna = 0;
    double total = 0, scheme = 0, netloc = 0, path = 0, query = 0, path_pct = 0, query_pct = 0;
  };
  std::map<int, Acc> acc;
  for (const auto& s : samples) {
    if (s.year < min_year) continue;
    Acc& a = acc[s.year];
    const auto& m = s.metrics;
    ++a.n;
    a.total += static_cast<double>(m.total_len);
    a.scheme += static_cast<double>(m.scheme_len);
    a.netloc += static_cast<double>(m.netloc_len);
    a.path += static_cast<double>(m.path_len);
    a.query += static_cast<double>(m.query_len);
    a.idna += m.idna;
    if (m.path_pct) {
      ++a.n_path;
      a.path_pct += static_cast<double>(*m.path_pct);
    }
    if (m.query_pct) {
      ++a.n_query;
      a.query_pct += static_cast<double>(*m.query_pct);
    }
  }
  std::vector<YearMeans> out;
  for (const auto& [year, a] : acc) {
    auto n = static_cast<double>(a.n);
    YearMeans y;
    y.year = year;
    y.n = a.n;
    y.total = a.total / n;
    y.scheme = a.scheme / n;
    y.netloc = a.netloc / n;
    y.path = a.path / n;
    y.query = a.query / n;
    y.idna_share = static_cast<double>(a.idna) / n;
    y.path_pct = a.n_path ? a.path_pct / static_cast<double>(a.n_path) : 0.0;
    y.query_pct = a.n_query ? a.query_pct / static_cast<double>(a.n_query) : 0.0;
    out.push_back(y);
  }
  return out;
}

std::vector<std::string> drop_outlier_domains(std::vector<YearMetric>& samples,
                                              std::size_t min_samples, double min_mean_query) {
  std::map<std::string, std::pair<std::size_t, double>> by_host;
  for (const auto& s : samples) {
    auto& [n, q] = by_host[s.metrics.host];
    ++n;
    q += static_cast<double>(s.metrics.query_len);
  }
  std::vector<std::string> dropped;
  for (const auto& [host, nq] : by_host)
    if (nq.first > min_samples && nq.second / static_cast<double>(nq.first) > min_mean_query)
      dropped.push_back(host);
  std::erase_if(samples, [&](const YearMetric& s) {
    return std::binary_search(dropped.begin(), dropped.end(), s.metrics.host);
  });
  return dropped;
}

void write_tsv(std::span<const YearMeans> rows, std::ostream& out) {
  out << "year\tn\ttotal\tscheme\tnetloc\tpath\tquery\tidna_share\tpath_pct\tquery_pct\n";
  char buf[256];
  for (const auto& y : rows) {
    std::snprintf(buf, sizeof buf, "%d\t%zu\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.6f\t%.4f\t%.4f\n",
                  y.year, y.n, y.total, y.scheme, y.netloc, y.path, y.query, y.idna_share,
                  y.path_pct, y.query_pct);
    out << buf;
  }
}

}  // namespace ccseg
