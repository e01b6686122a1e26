#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "olap/seq_io.hpp"

namespace olap {

struct SimulationParams {
  std::uint64_t genome_length = 20000;
  double depth = 20;
  std::uint32_t read_length = 1000;
  double error_rate = 0;             // per base; substitution/insertion/deletion equally likely
  std::uint64_t seed = 1;
  std::uint32_t min_true_overlap = 1;  // ground-truth threshold in genome bases
};

struct SimulatedRead {
  Read read;
  std::uint64_t genome_begin = 0;  // sampled interval, half-open
  std::uint64_t genome_end = 0;
};

struct Simulation {
  std::string genome;
  std::vector<SimulatedRead> reads;
  // Pairs (a < b) whose genome intervals share at least min_true_overlap bases.
  std::vector<std::pair<ReadId, ReadId>> true_overlaps;

  std::vector<Read> plain_reads() const;
};

// Forward-strand reads of fixed template length at uniform random starts;
// read count is round(G*d/L). Deterministic in `seed` on every platform.
Simulation simulate_reads(const SimulationParams& params);

// rid_a TAB rid_b TAB overlap_bases.
void write_truth(std::ostream& out, const Simulation& sim);

}  // namespace olap
