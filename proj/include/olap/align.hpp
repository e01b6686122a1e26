#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "olap/exchange.hpp"
#include "olap/overlap.hpp"
#include "olap/seq_io.hpp"
#include "olap/xdrop.hpp"

namespace olap {

struct Alignment {
  ReadId rid_a = 0;
  ReadId rid_b = 0;
  Seed seed;
  SeedAlignment result;
  std::uint32_t len_a = 0;
  std::uint32_t len_b = 0;
};

// Bases of every read referenced by this rank's tasks.
class ReadCache {
 public:
  void insert(ReadId rid, std::string bases) { reads_.insert_or_assign(rid, std::move(bases)); }
  bool contains(ReadId rid) const { return reads_.contains(rid); }
  const std::string& at(ReadId rid) const;
  std::size_t size() const { return reads_.size(); }

 private:
  std::unordered_map<ReadId, std::string> reads_;
};

struct FetchStats {
  std::uint64_t requests_sent = 0;  // distinct remote rids asked for
  std::uint64_t replies_sent = 0;   // reads shipped to other ranks
  std::uint64_t bytes_received = 0;
  std::uint64_t rounds = 0;
};

// Collective two-phase exchange: rid requests go to read owners, who send
// back (rid, bases) once per requesting rank and rid.
ReadCache fetch_reads(Comm& comm, std::span<const OverlapTask> tasks, std::span<const Read> local_reads,
                      const ReadPartition& partition, std::size_t round_cap, FetchStats* stats = nullptr);

struct AlignOptions {
  ScoringScheme scoring;
  int k = 17;
  bool canonical = false;
  bool with_transcript = false;
  bool best_per_pair = false;
  int threads = 1;
};

struct AlignStageResult {
  std::vector<Alignment> alignments;  // task order, then seed order
  std::uint64_t tasks = 0;
  std::uint64_t seeds = 0;
  std::uint64_t skipped_opposite_strand = 0;
};

// Aligns every seed of every (already filtered) task. Tasks are split into
// contiguous blocks across `threads` workers; results keep task order.
AlignStageResult run_alignment_stage(std::span<const OverlapTask> tasks, const ReadCache& cache,
                                     const AlignOptions& options);

// max / mean. All-zero input is reported as 1.0.
double load_imbalance(std::span<const double> per_rank);

// rid_a rid_b score begin_a end_a begin_b end_b len_a len_b seed_a seed_b,
// tab-separated, one alignment per line.
void write_alignments(std::ostream& out, std::span<const Alignment> alignments);

}  // namespace olap
