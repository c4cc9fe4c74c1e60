#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccseg/cdx.hpp"
#include "ccseg/lastmod.hpp"

namespace ccseg {

/// Deterministic generator state: mt19937_64 plus distribution code of our
/// own, so a seed yields the same stream with any standard library.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform();                                   // [0, 1)
  std::uint64_t below(std::uint64_t n);               // [0, n)
  double normal();                                    // N(0, 1)
  std::size_t categorical(const std::vector<double>& cumulative);

 private:
  std::mt19937_64 engine_;
};

struct PerturbedSegment {
  int segment_id = 0;
  /// Mixing weight of the rank-reversed distribution, in (0, 1].
  double divergence = 0.3;
};

struct BoostedSegment {
  int segment_id = 0;
  /// Multiplier on entries_per_segment; a larger sample tracks the whole
  /// archive more closely.
  double size_factor = 10.0;
};

struct AnomalyInjection {
  std::int64_t lm_posix = 0;
  std::uint64_t count = 0;
};

struct LastModProfile {
  double presence = 0.17;           // share of warc entries with a header
  double zero_offset_share = 0.53;  // header equals crawl time
  double near_offset_share = 0.17;  // within a few seconds of crawl time
  double zone_offset_share = 0.05;  // whole-hour local-time signatures
  int first_year = 1995;            // the rest spread over past years
  double yearly_growth = 1.3;
  double unusable_share = 0.0001;
  double incredible_share = 0.001;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  std::string archive_id = "CC-MAIN-2023-40";
  int n_segments = 100;
  std::size_t entries_per_segment = 1000;
  std::size_t mime_labels = 150;
  std::size_t language_labels = 120;
  double zipf_exponent = 1.1;
  /// Explicit base distribution over the mime catalog; Zipf when empty.
  std::vector<double> mime_weights;
  std::vector<PerturbedSegment> perturbed;
  std::vector<BoostedSegment> boosted;
  LastModProfile lastmod;
  std::vector<AnomalyInjection> anomalies;
  double redirect_share = 0.03;  // extra crawldiagnostics twins of warc entries
  std::int64_t crawl_start = 1695254400;  // 2023-09-21T00:00:00Z
  std::int64_t crawl_days = 14;
  std::size_t block_lines = 30;
  int n_shards = 3;
};

struct SynthArchive {
  /// Sorted index lines in file order, all subsets.
  std::vector<std::string> lines;
  /// Extraction rows (urlkey, timestamp, Last-Modified, url, filename),
  /// one per warc entry, sorted like the index.
  std::vector<ExtractionRow> lastmod;
  nlohmann::ordered_json manifest;
};

/// Throws Error{InvalidSpec}.
void validate(const SynthSpec& spec);

SynthArchive generate(const SynthSpec& spec);

/// Writes cdx-NNNNN.gz shards, cluster.idx, lastmod.tsv and manifest.json.
/// Blocks hold block_lines lines but never split a run of equal urlkeys.
void write_archive(const SynthArchive& archive, const SynthSpec& spec,
                   const std::filesystem::path& dir);

/// Spec from a JSON document (all keys optional); see README for the keys.
SynthSpec synth_spec_from_json(const nlohmann::json& j);

}  // namespace ccseg

namespace ccseg {

/// Declared (mime, detected) pairs the generator draws from; an empty mime
/// means the record carries none ("unk").
struct MimePairSpec {
  std::string mime;
  std::string detected;
};

std::vector<MimePairSpec> mime_catalog(std::size_t n);
std::vector<std::string> language_catalog(std::size_t n);

/// Normalized base distribution over the mime catalog.
std::vector<double> base_mime_distribution(const SynthSpec& spec);
/// Distribution a segment actually samples from (perturbation applied).
std::vector<double> segment_mime_distribution(const SynthSpec& spec, int segment_id);
/// Size-weighted mixture of all segment distributions.
std::vector<double> whole_mime_distribution(const SynthSpec& spec);

}  // namespace ccseg
