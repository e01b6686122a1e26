#include "olap/overlap.hpp"

#include <algorithm>
#include <map>

namespace olap {

std::vector<RawTask> enumerate_pairs(const KmerEntry& entry, std::uint64_t* self_pairs) {
  const auto& loc = entry.locations;
  std::vector<RawTask> out;
  out.reserve(loc.size() * (loc.size() - (loc.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i + 1 < loc.size(); ++i) {
    for (std::size_t j = i + 1; j < loc.size(); ++j) {
      if (loc[i].rid == loc[j].rid) {
        if (self_pairs) ++*self_pairs;
        continue;
      }
      out.push_back({loc[i].rid, loc[j].rid, {loc[i].position, loc[j].position}});
    }
  }
  return out;
}

ReadId assign_owner(ReadId rid_a, ReadId rid_b) {
  if (rid_a % 2 == 0 && rid_a > rid_b + 1) return rid_a;
  if (rid_a % 2 != 0 && rid_a < rid_b + 1) return rid_a;
  return rid_b;
}

std::vector<OverlapTask> consolidate(std::span<const RawTask> raw) {
  std::map<std::pair<ReadId, ReadId>, std::vector<Seed>> merged;
  for (const auto& t : raw) {
    if (t.rid_a < t.rid_b)
      merged[{t.rid_a, t.rid_b}].push_back(t.seed);
    else
      merged[{t.rid_b, t.rid_a}].push_back({t.seed.pos_b, t.seed.pos_a});
  }
  std::vector<OverlapTask> out;
  out.reserve(merged.size());
  for (auto& [pair, seeds] : merged) {
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    out.push_back({pair.first, pair.second, std::move(seeds)});
  }
  return out;
}

OverlapTask filter_seeds(const OverlapTask& task, std::uint32_t min_distance, std::size_t max_seeds) {
  OverlapTask out{task.rid_a, task.rid_b, {}};
  for (const auto& s : task.seeds) {
    if (out.seeds.size() >= max_seeds) break;
    if (out.seeds.empty() || s.pos_a >= static_cast<std::uint64_t>(out.seeds.back().pos_a) + min_distance)
      out.seeds.push_back(s);
  }
  return out;
}

PairBounds compute_bounds(const std::map<std::uint64_t, std::uint64_t>& retained_histogram, std::uint32_t m) {
  PairBounds b;
  std::uint64_t retained = 0;
  for (const auto& [f, n] : retained_histogram) {
    retained += n;
    b.exact += n * (f * (f - 1) / 2);
  }
  b.lower = retained;
  b.upper = retained * (static_cast<std::uint64_t>(m) * (m - 1) / 2);
  return b;
}

namespace {

struct TaskRecord {
  std::uint64_t rid_a;
  std::uint64_t rid_b;
  std::uint32_t pos_a;
  std::uint32_t pos_b;
};

}  // namespace

OverlapStageResult run_overlap_stage(Comm& comm, const KmerTable& table, const ReadPartition& partition,
                                     std::size_t round_cap) {
  OverlapStageResult result;
  std::vector<RawTask> received;

  auto it = table.entries().begin();
  const auto end = table.entries().end();
  std::vector<RawTask> batch;
  std::size_t batch_pos = 0;

  auto next = [&](ItemSink& sink) -> bool {
    while (batch_pos == batch.size()) {
      if (it == end) return false;
      const auto& e = it->second;
      ++it;
      result.raw_pairs += e.locations.size() * (e.locations.size() - 1) / 2;
      batch = enumerate_pairs(e, &result.self_pairs);
      batch_pos = 0;
    }
    const auto& t = batch[batch_pos++];
    const int dest = partition.owner(assign_owner(t.rid_a, t.rid_b));
    sink.put_pod(dest, TaskRecord{t.rid_a, t.rid_b, t.seed.pos_a, t.seed.pos_b});
    ++result.tasks_sent;
    return true;
  };
  auto deliver = [&](int, std::span<const std::uint8_t> item) {
    const auto rec = read_pod<TaskRecord>(item);
    received.push_back({rec.rid_a, rec.rid_b, {rec.pos_a, rec.pos_b}});
  };
  result.rounds = staged_stream(comm, round_cap, next, deliver).rounds;
  result.tasks_received = received.size();
  result.tasks = consolidate(received);
  return result;
}

void write_overlaps(std::ostream& out, std::span<const OverlapTask> tasks) {
  for (const auto& t : tasks) {
    out << t.rid_a << '\t' << t.rid_b << '\t' << t.seeds.size() << '\t';
    for (std::size_t i = 0; i < t.seeds.size(); ++i) {
      if (i) out << ' ';
      out << t.seeds[i].pos_a << ':' << t.seeds[i].pos_b;
    }
    out << '\n';
  }
}

}  // namespace olap
