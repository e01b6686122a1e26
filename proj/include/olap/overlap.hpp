#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "olap/exchange.hpp"
#include "olap/seq_io.hpp"
#include "olap/table.hpp"

namespace olap {

struct Seed {
  std::uint32_t pos_a = 0;
  std::uint32_t pos_b = 0;

  friend auto operator<=>(const Seed&, const Seed&) = default;
};

// One shared-k-mer observation between two reads, in enumeration order.
struct RawTask {
  ReadId rid_a = 0;
  ReadId rid_b = 0;
  Seed seed;

  friend bool operator==(const RawTask&, const RawTask&) = default;
};

// After consolidation: rid_a < rid_b, seeds sorted and unique.
struct OverlapTask {
  ReadId rid_a = 0;
  ReadId rid_b = 0;
  std::vector<Seed> seeds;

  friend bool operator==(const OverlapTask&, const OverlapTask&) = default;
};

// One task per unordered location pair (i < j in list order), oriented
// with the i-th location first. Pairs within a single read are skipped and
// tallied in `self_pairs` when given.
std::vector<RawTask> enumerate_pairs(const KmerEntry& entry, std::uint64_t* self_pairs = nullptr);

// Odd-even owner rule, applied verbatim to the oriented pair; returns the
// read whose owner receives the task.
ReadId assign_owner(ReadId rid_a, ReadId rid_b);

// Merges raw tasks by unordered pair, orienting seeds so pos_a belongs to
// the smaller rid; seeds deduplicated and sorted; tasks sorted by pair.
std::vector<OverlapTask> consolidate(std::span<const RawTask> raw);

inline constexpr std::size_t kUnlimitedSeeds = std::numeric_limits<std::size_t>::max();

// Greedy left-to-right: keep a seed when its pos_a is at least min_distance
// past the last kept one, up to max_seeds.
OverlapTask filter_seeds(const OverlapTask& task, std::uint32_t min_distance, std::size_t max_seeds);

struct PairBounds {
  std::uint64_t lower = 0;  // one pair per retained k-mer
  std::uint64_t exact = 0;  // sum f(f-1)/2
  std::uint64_t upper = 0;  // retained * m(m-1)/2
};

// From the global frequency histogram of retained k-mers.
PairBounds compute_bounds(const std::map<std::uint64_t, std::uint64_t>& retained_histogram, std::uint32_t m);

struct OverlapStageResult {
  std::vector<OverlapTask> tasks;      // consolidated, owned by this rank
  std::uint64_t raw_pairs = 0;         // location pairs enumerated here, self-pairs included
  std::uint64_t self_pairs = 0;
  std::uint64_t tasks_sent = 0;        // raw tasks shipped to owners
  std::uint64_t tasks_received = 0;
  std::uint64_t rounds = 0;
};

// Collective: enumerate pairs from the retained table, route each raw task
// to its owner, consolidate there.
OverlapStageResult run_overlap_stage(Comm& comm, const KmerTable& table, const ReadPartition& partition,
                                     std::size_t round_cap);

// rid_a TAB rid_b TAB seed_count TAB "pos_a:pos_b" seeds separated by spaces.
void write_overlaps(std::ostream& out, std::span<const OverlapTask> tasks);

}  // namespace olap
