#include "olap/align.hpp"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <set>
#include <thread>

namespace olap {

const std::string& ReadCache::at(ReadId rid) const {
  auto it = reads_.find(rid);
  if (it == reads_.end()) throw std::out_of_range("read " + std::to_string(rid) + " missing from cache");
  return it->second;
}

ReadCache fetch_reads(Comm& comm, std::span<const OverlapTask> tasks, std::span<const Read> local_reads,
                      const ReadPartition& partition, std::size_t round_cap, FetchStats* stats) {
  const int self = comm.rank();
  const RidRange mine = partition.range(self);
  auto local = [&](ReadId rid) -> const Read& {
    const auto& r = local_reads[rid - mine.begin];
    if (r.rid != rid) throw std::logic_error("local read layout does not match the partition");
    return r;
  };

  ReadCache cache;
  std::set<ReadId> wanted;
  for (const auto& t : tasks) {
    for (ReadId rid : {t.rid_a, t.rid_b}) {
      if (rid >= partition.total_reads())
        throw std::logic_error("task references read " + std::to_string(rid) + " beyond the input");
      if (mine.contains(rid)) {
        if (!cache.contains(rid)) cache.insert(rid, local(rid).bases);
      } else {
        wanted.insert(rid);
      }
    }
  }

  FetchStats fs;
  // Phase 1: requests.
  std::vector<std::pair<int, ReadId>> requests;
  {
    auto it = wanted.begin();
    auto next = [&](ItemSink& sink) -> bool {
      if (it == wanted.end()) return false;
      const ReadId rid = *it++;
      sink.put_pod(partition.owner(rid), rid);
      ++fs.requests_sent;
      return true;
    };
    auto deliver = [&](int src, std::span<const std::uint8_t> item) {
      const auto rid = read_pod<ReadId>(item);
      if (!mine.contains(rid))
        throw std::logic_error("rank " + std::to_string(src) + " asked for read " + std::to_string(rid) +
                               " which this rank does not own");
      requests.emplace_back(src, rid);
    };
    fs.rounds += staged_stream(comm, round_cap, next, deliver).rounds;
  }
  std::sort(requests.begin(), requests.end());
  requests.erase(std::unique(requests.begin(), requests.end()), requests.end());

  // Phase 2: replies carry rid then bases.
  {
    std::size_t idx = 0;
    Bytes payload;
    auto next = [&](ItemSink& sink) -> bool {
      if (idx == requests.size()) return false;
      const auto [dst, rid] = requests[idx++];
      const auto& bases = local(rid).bases;
      payload.resize(sizeof(ReadId) + bases.size());
      std::memcpy(payload.data(), &rid, sizeof(ReadId));
      std::memcpy(payload.data() + sizeof(ReadId), bases.data(), bases.size());
      sink.put(dst, payload);
      ++fs.replies_sent;
      return true;
    };
    auto deliver = [&](int, std::span<const std::uint8_t> item) {
      if (item.size() < sizeof(ReadId)) throw CommAborted("malformed read reply");
      ReadId rid;
      std::memcpy(&rid, item.data(), sizeof(ReadId));
      cache.insert(rid, std::string(reinterpret_cast<const char*>(item.data()) + sizeof(ReadId),
                                    item.size() - sizeof(ReadId)));
      fs.bytes_received += item.size();
    };
    fs.rounds += staged_stream(comm, round_cap, next, deliver).rounds;
  }

  for (ReadId rid : wanted)
    if (!cache.contains(rid)) throw std::logic_error("read " + std::to_string(rid) + " was requested but never arrived");
  if (stats) *stats = fs;
  return cache;
}

namespace {

struct BlockResult {
  std::vector<Alignment> alignments;
  std::uint64_t seeds = 0;
  std::uint64_t skipped = 0;
};

void align_block(std::span<const OverlapTask> tasks, const ReadCache& cache, const AlignOptions& opt,
                 BlockResult& out) {
  for (const auto& task : tasks) {
    const std::string& a = cache.at(task.rid_a);
    const std::string& b = cache.at(task.rid_b);
    std::size_t first = out.alignments.size();
    for (const auto& seed : task.seeds) {
      ++out.seeds;
      if (opt.canonical && std::string_view(a).substr(seed.pos_a, opt.k) != std::string_view(b).substr(seed.pos_b, opt.k)) {
        // Shared canonical k-mer from opposite strands; not aligned.
        ++out.skipped;
        continue;
      }
      Alignment al;
      al.rid_a = task.rid_a;
      al.rid_b = task.rid_b;
      al.seed = seed;
      al.len_a = static_cast<std::uint32_t>(a.size());
      al.len_b = static_cast<std::uint32_t>(b.size());
      al.result = xdrop_extend(a, b, seed.pos_a, seed.pos_b, opt.k, opt.scoring, opt.with_transcript);
      out.alignments.push_back(std::move(al));
    }
    if (opt.best_per_pair && out.alignments.size() > first + 1) {
      auto best = std::max_element(out.alignments.begin() + first, out.alignments.end(),
                                   [](const Alignment& x, const Alignment& y) { return x.result.score < y.result.score; });
      Alignment keep = std::move(*best);
      out.alignments.resize(first);
      out.alignments.push_back(std::move(keep));
    }
  }
}

}  // namespace

AlignStageResult run_alignment_stage(std::span<const OverlapTask> tasks, const ReadCache& cache,
                                     const AlignOptions& options) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(options.threads, 1)),
                                                     std::max<std::size_t>(tasks.size(), 1)));
  std::vector<BlockResult> blocks(workers);
  const std::size_t per = (tasks.size() + workers - 1) / workers;
  auto block = [&](std::size_t w) {
    const std::size_t b = std::min(tasks.size(), w * per);
    const std::size_t e = std::min(tasks.size(), b + per);
    align_block(tasks.subspan(b, e - b), cache, options, blocks[w]);
  };
  if (workers == 1) {
    block(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          block(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  AlignStageResult result;
  result.tasks = tasks.size();
  for (auto& b : blocks) {
    result.seeds += b.seeds;
    result.skipped_opposite_strand += b.skipped;
    std::move(b.alignments.begin(), b.alignments.end(), std::back_inserter(result.alignments));
  }
  return result;
}

double load_imbalance(std::span<const double> per_rank) {
  if (per_rank.empty()) throw std::invalid_argument("load imbalance needs at least one rank");
  double sum = 0, max = 0;
  for (double v : per_rank) {
    if (v < 0) throw std::invalid_argument("per-rank load must be non-negative");
    sum += v;
    max = std::max(max, v);
  }
  if (sum == 0) {
    std::cerr << "warning: load imbalance of all-zero loads reported as 1.0\n";
    return 1.0;
  }
  return max / (sum / static_cast<double>(per_rank.size()));
}

void write_alignments(std::ostream& out, std::span<const Alignment> alignments) {
  for (const auto& a : alignments) {
    const auto& r = a.result;
    out << a.rid_a << '\t' << a.rid_b << '\t' << r.score << '\t' << r.begin_s << '\t' << r.end_s << '\t' << r.begin_t
        << '\t' << r.end_t << '\t' << a.len_a << '\t' << a.len_b << '\t' << a.seed.pos_a << '\t' << a.seed.pos_b
        << '\n';
  }
}

}  // namespace olap
