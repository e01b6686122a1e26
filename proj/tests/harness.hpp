#pragma once
// Small helpers shared by the stage tests.

#include <span>
#include <string>
#include <vector>

#include "olap/seq_io.hpp"
#include "olap/simulate.hpp"

namespace olap::testing {

inline std::vector<Read> reads_from(const std::vector<std::string>& bases) {
  std::vector<Read> out;
  for (std::size_t i = 0; i < bases.size(); ++i) out.push_back({i, "r" + std::to_string(i), bases[i]});
  return out;
}

inline std::span<const Read> local_slice(const std::vector<Read>& reads, const ReadPartition& part, int rank) {
  const auto& r = part.range(rank);
  return std::span<const Read>(reads).subspan(r.begin, r.size());
}

// 20 kbp genome at depth 20 with 1 kbp reads.
inline std::vector<Read> desk_reads(double error_rate, std::uint64_t seed = 11) {
  SimulationParams p;
  p.error_rate = error_rate;
  p.seed = seed;
  return simulate_reads(p).plain_reads();
}

}  // namespace olap::testing
