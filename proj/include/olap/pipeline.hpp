#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "olap/align.hpp"
#include "olap/bloom.hpp"
#include "olap/exchange.hpp"
#include "olap/overlap.hpp"
#include "olap/seq_io.hpp"
#include "olap/table.hpp"

namespace olap {

enum class Backend { InProc, Socket };

struct PipelineConfig {
  std::vector<std::string> inputs;
  KmerParams kmer;  // kmer.max_count (m) has no default and must be set
  std::uint32_t min_seed_distance = 1000;
  std::size_t max_seeds = kUnlimitedSeeds;
  ScoringScheme scoring;
  int ranks = 1;
  Backend backend = Backend::InProc;
  std::string hostfile;
  int rank = 0;  // this process's rank, socket backend only
  std::size_t round_cap = kDefaultRoundCap;
  double bloom_fp = 0.05;
  double distinct_fraction = 0.9;
  std::string out_overlaps;
  std::string out_alignments;
  std::string out_metrics;
  std::string out_histogram;
  bool best_per_pair = false;
  bool with_transcript = false;
  bool merge_outputs = false;
  int align_threads = 1;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument naming the offending setting.
  void validate() const;
  std::vector<std::pair<std::string, std::string>> echo() const;
};

// Ordered "stage.metric" -> value report.
class Metrics {
 public:
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  double number(const std::string& key) const;  // throws if absent
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// "stage.metric<TAB>value" lines. Throws std::runtime_error on I/O failure.
void emit_metrics(const Metrics& metrics, const std::string& path);
void emit_metrics(const Metrics& metrics, std::ostream& out);

// A failure inside one pipeline stage, tagged with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RankOutcome {
  KmerTable table{2};                 // retained k-mers owned here
  std::vector<OverlapTask> overlaps;  // consolidated, before seed filtering
  std::vector<Alignment> alignments;
  Metrics metrics;                    // global values, identical on every rank
};

// Runs the four stages on one rank. `all_reads` is the whole input in rid
// order; the rank keeps only its partition slice.
RankOutcome run_rank(Comm& comm, const PipelineConfig& config, std::span<const Read> all_reads);

// Loads inputs, runs every rank for the configured backend, writes outputs
// (".rankN" files, merged when requested) and metrics. Returns rank 0's
// metrics (or this process's, for the socket backend).
Metrics run_pipeline(const PipelineConfig& config);

// Path of rank r's output file for `base`.
std::string rank_path(const std::string& base, int rank);

// Concatenates rank files, sorts lines by their leading numeric fields, and
// writes the result to `out_path`.
void merge_rank_outputs(const std::string& base, int ranks, const std::string& out_path);

// Sorts output lines by leading numeric fields (then text).
std::vector<std::string> canonical_sort(std::vector<std::string> lines);

}  // namespace olap
