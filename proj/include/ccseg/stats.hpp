#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccseg/features.hpp"

namespace ccseg {

using MaybeValue = std::optional<double>;

struct SpearmanResult {
  double rho = 0.0;  // NaN when either retained input is constant
  std::size_t n_used = 0;
};

/// Ranks with ties sharing the average of the positions they span (1-based).
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman's rho with pairwise omission: positions where either input is
/// missing are dropped, the rest are average-ranked and Pearson-correlated.
/// Throws Error{TooFewPairs} when fewer than 3 pairs remain and
/// Error{InvalidArgument} on unequal lengths.
SpearmanResult spearman_omit(std::span<const MaybeValue> x, std::span<const MaybeValue> y);

/// Symmetric rank-correlation matrix over the columns of a feature table:
/// index 0 is the whole archive, index k > 0 is segment_ids[k-1].
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(std::vector<int> segment_ids);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<int>& segment_ids() const noexcept { return segment_ids_; }
  std::string label(std::size_t i) const;

  double rho(std::size_t i, std::size_t j) const { return rho_[i * dim_ + j]; }
  std::size_t n_used(std::size_t i, std::size_t j) const { return n_used_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double rho, std::size_t n_used);

  /// rho of every segment against the whole archive, in segment_ids order.
  std::vector<double> segment_vs_whole() const;

 private:
  std::size_t dim_ = 0;
  std::vector<int> segment_ids_;
  std::vector<double> rho_;
  std::vector<std::size_t> n_used_;
};

/// All column pairs via spearman_omit. `threads` splits the rows; results
/// do not depend on it. Throws Error{TooFew} for tables under 3 rows.
CorrelationMatrix correlation_matrix(const MergedFeatureTable& table, unsigned threads = 1);

/// Writes rho then n_used blocks, whole row/column first.
void write_tsv(const CorrelationMatrix& m, std::ostream& out);
CorrelationMatrix read_correlation_tsv(std::istream& in);

struct Description {
  std::size_t n = 0;
  double min = 0, max = 0, mean = 0, variance = 0;  // unbiased variance
};

/// Throws Error{TooFew} for fewer than 2 values.
Description describe(std::span<const double> values);

/// Standard-normal quantile, |error| well below 1e-12 on (0, 1).
double normal_quantile(double p);

struct ConfidenceInterval {
  double lo = 0, hi = 0;
  bool degenerate = false;  // |rho| == 1: interval collapsed to [rho, rho]
};

/// Fisher z interval: tanh(atanh(rho) -+ z/sqrt(n-3)), z the 1-alpha/2
/// normal quantile. Throws Error{InvalidArgument} when n_used < 4.
ConfidenceInterval fisher_ci(double rho, std::size_t n_used, double alpha = 0.05);

struct SegmentRank {
  int segment_id = 0;
  double rho = 0;
  std::size_t n_used = 0;
  ConfidenceInterval ci;
};

/// Segments best-to-worst by correlation with the whole archive; equal rho
/// falls back to ascending segment id, NaN sorts last.
using SegmentRanking = std::vector<SegmentRank>;

SegmentRanking rank_segments(const CorrelationMatrix& m, double alpha = 0.05);

void write_tsv(const SegmentRanking& ranking, std::ostream& out);

/// Side-by-side "rank  <archive>..." table of segment ids, first `depth` ranks.
void write_rank_columns(std::span<const std::pair<std::string, SegmentRanking>> archives,
                        std::size_t depth, std::ostream& out);

/// Midrank position of x in the population, in percent:
/// 100 * (below + 0.5 * equal) / size. NaN population values are ignored.
double percentile_score(double x, std::span<const double> population);

struct ProxyHeatmap {
  std::string basis;
  std::string target;
  std::vector<double> scores;              // scores[N-1] for N = 1..max_n
  std::vector<std::vector<int>> chosen;    // basis segments behind each score
  double mean = 0;
  double sd = 0;  // sample standard deviation over the scores
};

/// For N = 1..max_n: pick the N basis segments best correlated with the
/// whole, average their target segment-vs-whole rho, and score that
/// average against the target's per-segment values.
ProxyHeatmap proxy_eval(const CorrelationMatrix& basis, const CorrelationMatrix& target,
                        std::size_t max_n = 10, std::string basis_name = "basis",
                        std::string target_name = "target");

/// Mean and sample standard deviation over several heatmap rows' cells.
std::pair<double, double> pooled_mean_sd(std::span<const ProxyHeatmap> rows);

void write_tsv(std::span<const ProxyHeatmap> rows, std::ostream& out);

}  // namespace ccseg
