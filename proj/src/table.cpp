#include "olap/table.hpp"

#include <algorithm>
#include <cassert>

namespace olap {

KmerTable::KmerTable(const CandidateKeySet& keys, std::uint32_t max_count) : max_count_(max_count) {
  entries_.reserve(keys.size());
  for (const auto& k : keys) entries_.try_emplace(k);
}

bool KmerTable::insert_location(const Kmer& kmer, ReadId rid, std::uint32_t position) {
  auto it = entries_.find(kmer);
  if (it == entries_.end()) return false;
  auto& e = it->second;
  ++e.count;
  if (e.locations.size() <= max_count_) e.locations.push_back({rid, position});
  return true;
}

void KmerTable::finalize() {
  std::erase_if(entries_, [&](const auto& kv) {
    return kv.second.count < 2 || kv.second.count > max_count_;
  });
  for (auto& [kmer, e] : entries_) {
    assert(e.locations.size() == e.count);
    std::sort(e.locations.begin(), e.locations.end());
    assert(std::adjacent_find(e.locations.begin(), e.locations.end()) == e.locations.end());
  }
  finalized_ = true;
}

const KmerEntry* KmerTable::find(const Kmer& kmer) const {
  auto it = entries_.find(kmer);
  return it == entries_.end() ? nullptr : &it->second;
}

std::map<std::uint64_t, std::uint64_t> KmerTable::histogram() const {
  std::map<std::uint64_t, std::uint64_t> h;
  for (const auto& [kmer, e] : entries_) ++h[e.count];
  return h;
}

namespace {

struct LocatedKmer {
  std::uint8_t kmer[Kmer::kBytes];
  std::uint64_t rid;
  std::uint32_t position;
} __attribute__((packed));

}  // namespace

TableStageResult run_table_stage(Comm& comm, std::span<const Read> local_reads, const CandidateKeySet& candidates,
                                 const KmerParams& params, std::size_t round_cap) {
  const int p = comm.size();
  TableStageResult result;
  result.table = KmerTable(candidates, params.max_count);
  result.candidate_keys = candidates.size();

  std::size_t read_idx = 0;
  std::vector<KmerOccurrence> window;
  std::size_t window_pos = 0;
  ReadId rid = 0;

  auto next = [&](ItemSink& sink) -> bool {
    while (window_pos == window.size()) {
      if (read_idx == local_reads.size()) return false;
      rid = local_reads[read_idx].rid;
      window = extract_kmers(local_reads[read_idx++].bases, params);
      window_pos = 0;
    }
    const auto& occ = window[window_pos++];
    LocatedKmer rec;
    occ.kmer.copy_to(rec.kmer);
    rec.rid = rid;
    rec.position = occ.position;
    sink.put_pod(owner_of(occ.kmer, p), rec);
    ++result.kmers_sent;
    return true;
  };
  auto deliver = [&](int, std::span<const std::uint8_t> item) {
    const auto rec = read_pod<LocatedKmer>(item);
    ++result.kmers_received;
    result.table.insert_location(Kmer::copy_from(rec.kmer, params.k), rec.rid, rec.position);
  };
  result.rounds = staged_stream(comm, round_cap, next, deliver).rounds;
  result.histogram = result.table.histogram();
  result.table.finalize();
  return result;
}

void write_histogram(std::ostream& out, const std::map<std::uint64_t, std::uint64_t>& hist) {
  for (const auto& [count, n] : hist) out << count << '\t' << n << '\n';
}

}  // namespace olap
