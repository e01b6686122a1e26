#include <doctest.h>

#include <atomic>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "harness.hpp"
#include "olap/align.hpp"
#include "olap/pipeline.hpp"

using namespace olap;
using namespace olap::testing;

namespace {

std::vector<Read> random_reads(std::mt19937_64& rng, int n) {
  std::vector<std::string> bases;
  for (int i = 0; i < n; ++i) {
    std::string s(50 + rng() % 100, 'A');
    for (auto& c : s) c = "ACGT"[rng() & 3];
    bases.push_back(s);
  }
  return reads_from(bases);
}

}  // namespace

TEST_CASE("fetch_reads skips the exchange payload when every read is local") {
  std::mt19937_64 rng(1);
  const auto reads = random_reads(rng, 8);
  const auto part = partition_reads(reads, 2);
  run_inproc(2, [&](Comm& c) {
    const auto& r = part.range(c.rank());
    std::vector<OverlapTask> tasks{{r.begin, r.end - 1, {{0, 0}}}};
    FetchStats st;
    auto cache = fetch_reads(c, tasks, local_slice(reads, part, c.rank()), part, kDefaultRoundCap, &st);
    CHECK(st.requests_sent == 0);
    CHECK(st.replies_sent == 0);
    CHECK(cache.at(r.begin) == reads[r.begin].bases);
    CHECK(cache.at(r.end - 1) == reads[r.end - 1].bases);
  });
}

TEST_CASE("fetch_reads sends exactly one request for one remote read") {
  std::mt19937_64 rng(2);
  const auto reads = random_reads(rng, 10);
  const auto part = partition_reads(reads, 2);
  REQUIRE(part.owner(9) == 1);
  std::uint64_t sent[2], replied[2];
  run_inproc(2, [&](Comm& c) {
    std::vector<OverlapTask> tasks;
    if (c.rank() == 0) tasks.push_back({0, 9, {{0, 0}}});
    FetchStats st;
    auto cache = fetch_reads(c, tasks, local_slice(reads, part, c.rank()), part, kDefaultRoundCap, &st);
    sent[c.rank()] = st.requests_sent;
    replied[c.rank()] = st.replies_sent;
    if (c.rank() == 0) CHECK(cache.at(9) == reads[9].bases);
  });
  CHECK(sent[0] == 1);
  CHECK(sent[1] == 0);
  CHECK(replied[0] == 0);
  CHECK(replied[1] == 1);
}

TEST_CASE("fetched caches are complete and byte-identical") {
  std::mt19937_64 rng(3);
  const auto reads = random_reads(rng, 60);
  const auto part = partition_reads(reads, 4);
  std::atomic<int> bad{0};
  run_inproc(4, [&](Comm& c) {
    std::mt19937_64 local(40 + c.rank());
    std::vector<OverlapTask> tasks;
    for (int i = 0; i < 30; ++i) {
      ReadId a = local() % 60, b = local() % 60;
      if (a == b) continue;
      tasks.push_back({std::min(a, b), std::max(a, b), {{0, 0}}});
    }
    // A tiny cap forces several request and reply rounds.
    auto cache = fetch_reads(c, tasks, local_slice(reads, part, c.rank()), part, 512);
    for (const auto& t : tasks)
      for (ReadId rid : {t.rid_a, t.rid_b})
        if (!cache.contains(rid) || cache.at(rid) != reads[rid].bases) ++bad;
  });
  CHECK(bad == 0);
}

TEST_CASE("fetch_reads rejects out-of-range rids") {
  std::mt19937_64 rng(4);
  const auto reads = random_reads(rng, 4);
  const auto part = partition_reads(reads, 2);
  CHECK_THROWS(run_inproc(2, [&](Comm& c) {
    std::vector<OverlapTask> tasks{{0, 99, {{0, 0}}}};
    fetch_reads(c, tasks, local_slice(reads, part, c.rank()), part, kDefaultRoundCap);
  }));
}

TEST_CASE("one alignment per surviving seed") {
  const std::string a = "TTTTACGTACGGATCCATGCAAAA";
  const std::string b = "GGACGTACGGATCCATGCACC";
  ReadCache cache;
  cache.insert(0, a);
  cache.insert(1, b);
  AlignOptions opt;
  opt.k = 5;
  opt.with_transcript = true;

  std::vector<OverlapTask> one{{0, 1, {{4, 2}}}};
  auto res = run_alignment_stage(one, cache, opt);
  REQUIRE(res.alignments.size() == 1);
  CHECK(res.alignments[0].len_a == a.size());
  CHECK(res.alignments[0].len_b == b.size());
  CHECK(validate_alignment(res.alignments[0].result, a, b, opt.scoring).ok);

  std::vector<OverlapTask> three{{0, 1, {{4, 2}, {8, 6}, {12, 10}}}};
  res = run_alignment_stage(three, cache, opt);
  CHECK(res.alignments.size() == 3);
  CHECK(res.seeds == 3);
  CHECK(res.tasks == 1);

  opt.best_per_pair = true;
  CHECK(run_alignment_stage(three, cache, opt).alignments.size() == 1);
}

TEST_CASE("thread count does not change the results") {
  std::mt19937_64 rng(5);
  ReadCache cache;
  std::vector<OverlapTask> tasks;
  for (ReadId i = 0; i < 40; ++i) {
    std::string a(300, 'A');
    for (auto& c : a) c = "ACGT"[rng() & 3];
    std::string b = a;
    for (int e = 0; e < 15; ++e) {
      const auto at = rng() % b.size();
      if (at < 100 || at >= 117) b[at] = "ACGT"[rng() & 3];
    }
    cache.insert(2 * i, a);
    cache.insert(2 * i + 1, b);
    tasks.push_back({2 * i, 2 * i + 1, {{100, 100}}});
  }
  AlignOptions opt;
  opt.k = 17;
  auto one = run_alignment_stage(tasks, cache, opt);
  opt.threads = 4;
  auto four = run_alignment_stage(tasks, cache, opt);
  REQUIRE(one.alignments.size() == 40);
  REQUIRE(four.alignments.size() == 40);
  for (std::size_t i = 0; i < one.alignments.size(); ++i) {
    CHECK(one.alignments[i].rid_a == four.alignments[i].rid_a);
    CHECK(one.alignments[i].result.score == four.alignments[i].result.score);
    CHECK(one.alignments[i].result.end_t == four.alignments[i].result.end_t);
  }
}

TEST_CASE("canonical mode skips opposite-strand seeds") {
  const std::string a = "ACGGTCAAGT";
  const std::string b = reverse_complement(a);
  ReadCache cache;
  cache.insert(0, a);
  cache.insert(1, b);
  AlignOptions opt;
  opt.k = 10;
  opt.canonical = true;
  std::vector<OverlapTask> tasks{{0, 1, {{0, 0}}}};
  auto res = run_alignment_stage(tasks, cache, opt);
  CHECK(res.alignments.empty());
  CHECK(res.skipped_opposite_strand == 1);
}

TEST_CASE("load_imbalance examples") {
  std::vector<double> even{5, 5, 5, 5}, skew{10, 0, 0, 0}, zero{0, 0};
  CHECK(load_imbalance(even) == doctest::Approx(1.0));
  CHECK(load_imbalance(skew) == doctest::Approx(4.0));
  CHECK(load_imbalance(zero) == doctest::Approx(1.0));
}

TEST_CASE("alignment output format") {
  Alignment al;
  al.rid_a = 3;
  al.rid_b = 8;
  al.seed = {10, 2};
  al.result = {40, 5, 50, 0, 44, ""};
  al.len_a = 60;
  al.len_b = 70;
  std::ostringstream os;
  std::vector<Alignment> v{al};
  write_alignments(os, v);
  CHECK(os.str() == "3\t8\t40\t5\t50\t0\t44\t60\t70\t10\t2\n");
}

TEST_CASE("error-free reads: every true overlap is aligned over its full extent") {
  SimulationParams sp;
  sp.seed = 19;
  const auto sim = simulate_reads(sp);
  const auto reads = sim.plain_reads();

  PipelineConfig cfg;
  cfg.kmer.k = 17;
  cfg.kmer.max_count = 200;
  cfg.ranks = 4;
  cfg.best_per_pair = true;
  std::mutex mu;
  std::map<std::pair<ReadId, ReadId>, SeedAlignment> best;
  run_inproc(4, [&](Comm& c) {
    auto out = run_rank(c, cfg, reads);
    std::lock_guard lock(mu);
    for (const auto& al : out.alignments) best.emplace(std::pair{al.rid_a, al.rid_b}, al.result);
  });

  std::uint64_t checked = 0, missing = 0, partial = 0;
  for (std::size_t i = 0; i < sim.reads.size(); ++i)
    for (std::size_t j = i + 1; j < sim.reads.size(); ++j) {
      const auto& x = sim.reads[i];
      const auto& y = sim.reads[j];
      const auto lo = std::max(x.genome_begin, y.genome_begin);
      const auto hi = std::min(x.genome_end, y.genome_end);
      if (hi < lo + 17) continue;
      ++checked;
      auto it = best.find({i, j});
      if (it == best.end()) {
        ++missing;
        continue;
      }
      const auto& r = it->second;
      partial += r.begin_s != lo - x.genome_begin || r.end_s != hi - x.genome_begin ||
                 r.begin_t != lo - y.genome_begin || r.end_t != hi - y.genome_begin;
    }
  CHECK(checked > 100);
  CHECK(missing == 0);
  CHECK(partial == 0);
}
