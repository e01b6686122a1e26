#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "olap/exchange.hpp"
#include "olap/kmer.hpp"
#include "olap/seq_io.hpp"

namespace olap {

struct BloomSize {
  std::uint64_t bits = 0;
  int hashes = 0;
};

// bits = ceil(-n ln p / (ln 2)^2), hashes = round(bits/n * ln 2), at least 1.
BloomSize size_bloom(double expected_n, double target_fp);

// One rank's slice of the distributed filter. Probe i of a key uses
// h1 + i*h2 (double hashing over the packed k-mer).
class BloomFilter {
 public:
  explicit BloomFilter(BloomSize size);

  // True iff every probed bit was already set; sets them all afterwards.
  bool insert_and_test(const Kmer& kmer);
  bool contains(const Kmer& kmer) const;

  std::uint64_t bits() const { return nbits_; }
  int hashes() const { return hashes_; }
  std::uint64_t inserted() const { return inserted_; }
  std::uint64_t bits_set() const;
  // (set bits / bits)^h, the current false-positive probability.
  double estimated_fp() const;
  // Distinct keys implied by the set-bit count: -(b/h) ln(1 - set/b).
  double estimated_distinct() const;

 private:
  std::uint64_t nbits_;
  int hashes_;
  std::uint64_t inserted_ = 0;
  std::vector<std::uint64_t> words_;
};

using CandidateKeySet = std::unordered_set<Kmer, KmerHasher>;

struct BloomStageOptions {
  double target_fp = 0.05;
  double distinct_fraction = 0.9;  // expected distinct / parsed k-mers
  std::size_t round_cap = kDefaultRoundCap;
};

struct BloomStageResult {
  CandidateKeySet candidates;
  BloomSize size;
  std::uint64_t kmers_sent = 0;      // parsed locally
  std::uint64_t kmers_received = 0;  // inserted into this rank's filter
  double estimated_fp = 0;
  double estimated_distinct = 0;  // distinct k-mers owned here, from the filter
  std::uint64_t rounds = 0;
};

// Collective. Streams every parsed k-mer to its owner, which inserts it into
// its filter partition; keys seen again become candidates. The filter is
// sized from the k-mer count model over the global base count and mean
// read length, times the distinct fraction, split evenly across ranks.
BloomStageResult run_bloom_stage(Comm& comm, std::span<const Read> local_reads, const KmerParams& params,
                                 const BloomStageOptions& options);

}  // namespace olap
