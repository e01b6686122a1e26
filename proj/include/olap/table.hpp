#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "olap/bloom.hpp"
#include "olap/exchange.hpp"
#include "olap/kmer.hpp"
#include "olap/seq_io.hpp"

namespace olap {

struct Location {
  ReadId rid = 0;
  std::uint32_t position = 0;

  friend auto operator<=>(const Location&, const Location&) = default;
};

// Occurrence count is exact; at most m+1 locations are stored so that
// "exactly m" and "more than m" remain distinguishable.
struct KmerEntry {
  std::uint64_t count = 0;
  std::vector<Location> locations;
};

class KmerTable {
 public:
  using Map = std::unordered_map<Kmer, KmerEntry, KmerHasher>;

  explicit KmerTable(std::uint32_t max_count) : max_count_(max_count) {}
  KmerTable(const CandidateKeySet& keys, std::uint32_t max_count);

  void add_key(const Kmer& kmer) { entries_.try_emplace(kmer); }

  // No-op unless `kmer` is a key. Returns whether it was.
  bool insert_location(const Kmer& kmer, ReadId rid, std::uint32_t position);

  // Drops entries with count < 2 or count > m and sorts each surviving
  // location list by (rid, position).
  void finalize();

  std::uint32_t max_count() const { return max_count_; }
  std::size_t size() const { return entries_.size(); }
  bool finalized() const { return finalized_; }
  const Map& entries() const { return entries_; }
  const KmerEntry* find(const Kmer& kmer) const;

  // count -> number of keys with that count, over current entries.
  std::map<std::uint64_t, std::uint64_t> histogram() const;

 private:
  std::uint32_t max_count_;
  Map entries_;
  bool finalized_ = false;
};

struct TableStageResult {
  KmerTable table{2};
  std::uint64_t kmers_sent = 0;       // parsed locally, K_input share
  std::uint64_t kmers_received = 0;
  std::uint64_t candidate_keys = 0;   // keys before finalization
  std::uint64_t rounds = 0;
  std::map<std::uint64_t, std::uint64_t> histogram;  // before finalization
};

// Collective second pass: every (k-mer, rid, position) goes to the k-mer's
// owner and lands in the table only if the k-mer is a candidate there.
TableStageResult run_table_stage(Comm& comm, std::span<const Read> local_reads, const CandidateKeySet& candidates,
                                 const KmerParams& params, std::size_t round_cap);

// Tab-separated "count<TAB>num_kmers" lines in ascending count order.
void write_histogram(std::ostream& out, const std::map<std::uint64_t, std::uint64_t>& hist);

}  // namespace olap
