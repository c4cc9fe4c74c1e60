#pragma once

// Fixtures and brute-force oracles shared by the test binaries. The oracles
// deliberately avoid the library's own code paths.

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fixture {

// The two index lines of the org,w3)/tr/xml example, as published.
inline const std::string kRedirectLine =
    R"(org,w3)/tr/xml 20210613173657 {"url": "https://www.w3.org/TR/XML/", "mime": "text/html", "mime-detected": "text/html", "status": "301", "digest": "LQRWZ7SMYYGCL55UJSVAS3BY64YNZ4DQ", "length": "743", "offset": "27241472", "filename": "crawl-data/CC-MAIN-2021-25/segments/1623487610196.46/crawldiagnostics/CC-MAIN-20210613161945-20210613191945-00275.warc.gz", "redirect": "https://www.w3.org/TR/xml/"})";
inline const std::string kWarcLine =
    R"(org,w3)/tr/xml 20210613173657 {"url": "https://www.w3.org/TR/xml/", "mime": "text/html", "mime-detected": "application/xhtml+xml", "status": "200", "digest": "AOMNGHUQLUKLHHWBNUL7MOVXKIUX522W", "length": "55091", "offset": "968583998", "filename": "crawl-data/CC-MAIN-2021-25/segments/1623487610196.46/warc/CC-MAIN-20210613161945-20210613191945-00371.warc.gz", "charset": "UTF-8", "languages": "eng"})";

inline const std::string kMasterLine = "org,w3)/tr/tr.xml cdx-00253.gz 557238519 185309";

// Three rows of the merged mime table for 2019-35, segments 71-73.
inline const std::string kMergedTable =
    "label\twhole\tseg71\tseg72\tseg73\n"
    "text/plain application/mbox\t37711\t435\t364\t397\n"
    "application/octet-stream application/x-tika-msoffice\t37414\t354\tnan\t2\n"
    "application/octet-stream text/x-log\t36352\t651\t248\t345\n";

}  // namespace fixture

namespace oracle {

// Spearman by definition: ranks from explicit counting, Pearson in long double.
inline std::optional<double> spearman(const std::vector<std::optional<double>>& x,
                                      const std::vector<std::optional<double>>& y) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] && y[i]) {
      a.push_back(*x[i]);
      b.push_back(*y[i]);
    }
  if (a.size() < 3) return std::nullopt;
  auto rank = [](const std::vector<double>& v) {
    std::vector<long double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      long double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  auto ra = rank(a), rb = rank(b);
  const long double n = static_cast<long double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nan("");
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

// 0.975 quantile of the standard normal, to double precision.
inline constexpr double kZ975 = 1.959963984540054;

inline std::pair<double, double> fisher(double rho, std::size_t n, double z = kZ975) {
  double f = 0.5 * std::log((1 + rho) / (1 - rho));
  double s = 1.0 / std::sqrt(static_cast<double>(n) - 3.0);
  auto back = [](double v) { return (std::exp(2 * v) - 1) / (std::exp(2 * v) + 1); };
  return {back(f - z * s), back(f + z * s)};
}

// Seconds since the epoch by walking the calendar year by year.
inline std::int64_t posix(int year, int month, int day, int hh, int mm, int ss) {
  auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  std::int64_t days = 0;
  for (int y = 1970; y < year; ++y) days += leap(y) ? 366 : 365;
  for (int y = year; y < 1970; ++y) days -= leap(y) ? 366 : 365;
  for (int m = 1; m < month; ++m) days += kDays[m - 1] + (m == 2 && leap(year) ? 1 : 0);
  days += day - 1;
  return days * 86400 + hh * 3600 + mm * 60 + ss;
}

// Every line of a gzip file, decoded by zlib's own multi-member reader.
inline std::vector<std::string> gz_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  gzFile f = gzopen(p.c_str(), "rb");
  if (!f) return out;
  std::string cur;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) {
    for (int i = 0; i < n; ++i) {
      if (buf[i] == '\n') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(buf[i]);
      }
    }
  }
  gzclose(f);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string_view key_of(std::string_view line) { return line.substr(0, line.find(' ')); }

}  // namespace oracle

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ccseg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

// Checks that `expr` throws ccseg::Error carrying `errc`.
#define CHECK_ERRC(expr, errc)                                  \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const ccseg::Error& e_) {                          \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());            \
    }                                                           \
    CHECK_MESSAGE(thrown_, "expected an error from " #expr);    \
  } while (0)
