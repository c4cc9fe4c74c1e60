#include "ccseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "ccseg/error.hpp"

namespace ccseg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_exact(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double parse_double(std::string_view s) {
  if (s == "nan") return kNaN;
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw Error(Errc::MalformedLine, "bad number '" + tmp + "'");
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      f.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return f;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean(i+1 .. j)
    double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

SpearmanResult spearman_omit(std::span<const MaybeValue> x, std::span<const MaybeValue> y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "inputs differ in length");
  std::vector<double> xs, ys;
  xs.reserve(x.size());
  ys.reserve(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i] || !y[i] || std::isnan(*x[i]) || std::isnan(*y[i])) continue;
    xs.push_back(*x[i]);
    ys.push_back(*y[i]);
  }
  const std::size_t n = xs.size();
  if (n < 3) throw Error(Errc::TooFewPairs, std::to_string(n) + " complete pairs");

  auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  // Both rank vectors have mean (n+1)/2.
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  SpearmanResult r;
  r.n_used = n;
  if (sxx == 0 || syy == 0) {
    r.rho = kNaN;
    return r;
  }
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return r;
}

CorrelationMatrix::CorrelationMatrix(std::vector<int> segment_ids)
    : dim_(segment_ids.size() + 1),
      segment_ids_(std::move(segment_ids)),
      rho_(dim_ * dim_, kNaN),
      n_used_(dim_ * dim_, 0) {}

std::string CorrelationMatrix::label(std::size_t i) const {
  return i == 0 ? std::string("whole") : segment_column_name(segment_ids_[i - 1]);
}

void CorrelationMatrix::set(std::size_t i, std::size_t j, double rho, std::size_t n_used) {
  rho_[i * dim_ + j] = rho;
  rho_[j * dim_ + i] = rho;
  n_used_[i * dim_ + j] = n_used;
  n_used_[j * dim_ + i] = n_used;
}

std::vector<double> CorrelationMatrix::segment_vs_whole() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < dim_; ++k) out.push_back(rho(0, k));
  return out;
}

CorrelationMatrix correlation_matrix(const MergedFeatureTable& table, unsigned threads) {
  if (table.rows() < 3) throw Error(Errc::TooFew, "correlation needs at least 3 table rows");
  CorrelationMatrix m(table.segment_ids);
  const std::size_t dim = m.dim();
  const std::size_t rows = table.rows();

  std::vector<std::vector<MaybeValue>> cols(dim, std::vector<MaybeValue>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    cols[0][r] = static_cast<double>(table.whole[r]);
    for (std::size_t c = 0; c + 1 < dim; ++c)
      if (table.cells[r][c]) cols[c + 1][r] = static_cast<double>(*table.cells[r][c]);
  }

  // Column ranks depend on which rows a pair keeps, so each cell recomputes
  // them; cells are independent and written to disjoint slots.
  std::vector<std::vector<SpearmanResult>> upper(dim);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < dim; i += stride) {
      upper[i].resize(dim);
      for (std::size_t j = i + 1; j < dim; ++j) {
        try {
          upper[i][j] = spearman_omit(cols[i], cols[j]);
        } catch (const Error& e) {
          if (e.code() != Errc::TooFewPairs) throw;
          upper[i][j] = SpearmanResult{kNaN, 0};
        }
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(dim)));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  for (std::size_t i = 0; i < dim; ++i) {
    std::size_t complete = 0;
    for (const auto& v : cols[i]) complete += v.has_value();
    m.set(i, i, 1.0, complete);
    for (std::size_t j = i + 1; j < dim; ++j) m.set(i, j, upper[i][j].rho, upper[i][j].n_used);
  }
  return m;
}

void write_tsv(const CorrelationMatrix& m, std::ostream& out) {
  auto header = [&](const char* first) {
    out << first;
    for (std::size_t j = 0; j < m.dim(); ++j) out << '\t' << m.label(j);
    out << '\n';
  };
  header("rho");
  for (std::size_t i = 0; i < m.dim(); ++i) {
    out << m.label(i);
    for (std::size_t j = 0; j < m.dim(); ++j) out << '\t' << fmt_exact(m.rho(i, j));
    out << '\n';
  }
  header("n_used");
  for (std::size_t i = 0; i < m.dim(); ++i) {
    out << m.label(i);
    for (std::size_t j = 0; j < m.dim(); ++j) out << '\t' << m.n_used(i, j);
    out << '\n';
  }
}

CorrelationMatrix read_correlation_tsv(std::istream& in) {
  std::vector<std::vector<std::string>> rho_rows, n_rows;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>>* target = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto f = split_tabs(line);
    if (f[0] == "rho" || f[0] == "n_used") {
      target = f[0] == "rho" ? &rho_rows : &n_rows;
      header.assign(f.begin(), f.end());
      continue;
    }
    if (!target) throw Error(Errc::MalformedLine, "matrix row before header");
    if (f.size() != header.size()) throw Error(Errc::MalformedLine, "matrix row width");
    target->emplace_back(f.begin() + 1, f.end());
  }
  if (header.size() < 2 || header[1] != "whole")
    throw Error(Errc::MalformedLine, "matrix header must start with whole");
  std::vector<int> ids;
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (!header[j].starts_with("seg")) throw Error(Errc::MalformedLine, "bad column " + header[j]);
    ids.push_back(std::stoi(header[j].substr(3)));
  }
  CorrelationMatrix m(ids);
  if (rho_rows.size() != m.dim() || n_rows.size() != m.dim())
    throw Error(Errc::MalformedLine, "matrix is not square");
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = i; j < m.dim(); ++j)
      m.set(i, j, parse_double(rho_rows[i][j]), std::stoull(n_rows[i][j]));
  return m;
}

Description describe(std::span<const double> values) {
  if (values.size() < 2) throw Error(Errc::TooFew, "describe needs at least 2 values");
  Description d;
  d.min = d.max = values[0];
  // Welford's single-pass update
  double mean = 0, m2 = 0;
  std::size_t n = 0;
  for (double v : values) {
    ++n;
    double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
    d.min = std::min(d.min, v);
    d.max = std::max(d.max, v);
  }
  d.n = n;
  d.mean = mean;
  d.variance = m2 / static_cast<double>(n - 1);
  return d;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(Errc::InvalidArgument, "quantile needs 0 < p < 1");
  // Acklam's rational approximation (relative error ~1e-9) ...
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425, phigh = 1 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // ... polished with Halley steps against the exact CDF.
  constexpr double kSqrt2Pi = 2.50662827463100050242;
  for (int i = 0; i < 2; ++i) {
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * kSqrt2Pi * std::exp(x * x / 2);
    x = x - u / (1 + x * u / 2);
  }
  return x;
}

ConfidenceInterval fisher_ci(double rho, std::size_t n_used, double alpha) {
  if (n_used < 4) throw Error(Errc::InvalidArgument, "fisher_ci needs n_used >= 4");
  if (!(alpha > 0 && alpha < 1)) throw Error(Errc::InvalidArgument, "alpha must be in (0,1)");
  if (std::isnan(rho)) return ConfidenceInterval{kNaN, kNaN, true};
  if (std::abs(rho) >= 1.0) return ConfidenceInterval{rho, rho, true};
  double z = normal_quantile(1 - alpha / 2);
  double s = 1.0 / std::sqrt(static_cast<double>(n_used) - 3.0);
  double centre = std::atanh(rho);
  return ConfidenceInterval{std::tanh(centre - z * s), std::tanh(centre + z * s), false};
}

SegmentRanking rank_segments(const CorrelationMatrix& m, double alpha) {
  SegmentRanking out;
  for (std::size_t k = 1; k < m.dim(); ++k) {
    SegmentRank r;
    r.segment_id = m.segment_ids()[k - 1];
    r.rho = m.rho(0, k);
    r.n_used = m.n_used(0, k);
    if (r.n_used >= 4) r.ci = fisher_ci(r.rho, r.n_used, alpha);
    else r.ci = ConfidenceInterval{kNaN, kNaN, true};
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const SegmentRank& a, const SegmentRank& b) {
    bool an = std::isnan(a.rho), bn = std::isnan(b.rho);
    if (an != bn) return bn;
    if (!an && a.rho != b.rho) return a.rho > b.rho;
    return a.segment_id < b.segment_id;
  });
  return out;
}

void write_tsv(const SegmentRanking& ranking, std::ostream& out) {
  out << "rank\tsegment\trho\tci_lo\tci_hi\tn_used\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& r = ranking[i];
    out << i + 1 << '\t' << r.segment_id << '\t' << fmt_fixed(r.rho, 6) << '\t'
        << fmt_fixed(r.ci.lo, 6) << '\t' << fmt_fixed(r.ci.hi, 6) << '\t' << r.n_used << '\n';
  }
}

void write_rank_columns(std::span<const std::pair<std::string, SegmentRanking>> archives,
                        std::size_t depth, std::ostream& out) {
  out << "rank";
  for (const auto& [name, ranking] : archives) out << '\t' << name;
  out << '\n';
  for (std::size_t i = 0; i < depth; ++i) {
    out << i + 1;
    for (const auto& [name, ranking] : archives) {
      out << '\t';
      if (i < ranking.size()) out << ranking[i].segment_id;
    }
    out << '\n';
  }
}

double percentile_score(double x, std::span<const double> population) {
  std::size_t below = 0, equal = 0, size = 0;
  for (double v : population) {
    if (std::isnan(v)) continue;
    ++size;
    if (v < x) ++below;
    else if (v == x) ++equal;
  }
  if (size == 0 || std::isnan(x)) return kNaN;
  return 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) /
         static_cast<double>(size);
}

namespace {

std::pair<double, double> mean_sd(std::span<const double> v) {
  std::vector<double> finite;
  for (double x : v)
    if (!std::isnan(x)) finite.push_back(x);
  if (finite.empty()) return {kNaN, kNaN};
  double mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
  if (finite.size() < 2) return {mean, kNaN};
  double ss = 0;
  for (double x : finite) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(finite.size() - 1))};
}

}  // namespace

ProxyHeatmap proxy_eval(const CorrelationMatrix& basis, const CorrelationMatrix& target,
                        std::size_t max_n, std::string basis_name, std::string target_name) {
  if (basis.segment_ids() != target.segment_ids())
    throw Error(Errc::InvalidArgument, "basis and target label segments differently");
  ProxyHeatmap h;
  h.basis = std::move(basis_name);
  h.target = std::move(target_name);

  auto ranking = rank_segments(basis);
  auto target_values = target.segment_vs_whole();
  const auto& ids = target.segment_ids();
  auto column_of = [&](int id) {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  };

  max_n = std::min(max_n, ranking.size());
  double sum = 0;
  std::vector<int> picked;
  for (std::size_t n = 1; n <= max_n; ++n) {
    int id = ranking[n - 1].segment_id;
    picked.push_back(id);
    sum += target_values[column_of(id)];
    h.scores.push_back(percentile_score(sum / static_cast<double>(n), target_values));
    h.chosen.push_back(picked);
  }
  std::tie(h.mean, h.sd) = mean_sd(h.scores);
  return h;
}

std::pair<double, double> pooled_mean_sd(std::span<const ProxyHeatmap> rows) {
  std::vector<double> all;
  for (const auto& r : rows) all.insert(all.end(), r.scores.begin(), r.scores.end());
  return mean_sd(all);
}

void write_tsv(std::span<const ProxyHeatmap> rows, std::ostream& out) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.scores.size());
  out << "target\tbasis";
  for (std::size_t n = 1; n <= width; ++n) out << "\tN" << n;
  out << "\tmean\tsd\n";
  for (const auto& r : rows) {
    out << r.target << '\t' << r.basis;
    for (std::size_t n = 0; n < width; ++n)
      out << '\t' << (n < r.scores.size() ? fmt_fixed(r.scores[n], 1) : std::string());
    out << '\t' << fmt_fixed(r.mean, 2) << '\t' << fmt_fixed(r.sd, 2) << '\n';
  }
}

}  // namespace ccseg
