#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <unistd.h>
#include <sstream>

#include "harness.hpp"
#include "olap/pipeline.hpp"
#include "olap/simulate.hpp"

using namespace olap;
using namespace olap::testing;
namespace fs = std::filesystem;

namespace {

using Runner = void (*)(int, const std::function<void(Comm&)>&);

struct Outputs {
  std::vector<std::string> overlaps;
  std::vector<std::string> alignments;
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Outputs run_all(Runner run, int ranks, const PipelineConfig& cfg, const std::vector<Read>& reads,
                std::uint64_t shuffle_seed = 0) {
  std::mutex mu;
  std::string ov, al;
  run(ranks, [&](Comm& c) {
    if (shuffle_seed) c.set_source_shuffle(shuffle_seed + c.rank());
    auto out = run_rank(c, cfg, reads);
    std::ostringstream o, a;
    write_overlaps(o, out.overlaps);
    write_alignments(a, out.alignments);
    std::lock_guard lock(mu);
    ov += o.str();
    al += a.str();
  });
  return {canonical_sort(split_lines(ov)), canonical_sort(split_lines(al))};
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.kmer.k = 17;
  cfg.kmer.max_count = 40;
  cfg.min_seed_distance = 500;
  return cfg;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("olap_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("simulator: determinism, exact substrings, read count") {
  SimulationParams p;
  p.seed = 5;
  p.error_rate = 0.1;
  auto a = simulate_reads(p), b = simulate_reads(p);
  std::ostringstream fa, fb;
  write_fastq(fa, a.plain_reads());
  write_fastq(fb, b.plain_reads());
  CHECK(fa.str() == fb.str());
  std::ostringstream ta, tb;
  write_truth(ta, a);
  write_truth(tb, b);
  CHECK(ta.str() == tb.str());

  p.error_rate = 0;
  auto exact = simulate_reads(p);
  CHECK(exact.reads.size() == 400);
  for (const auto& r : exact.reads) {
    CHECK(r.read.bases == exact.genome.substr(r.genome_begin, r.genome_end - r.genome_begin));
    CHECK(r.read.bases.size() == 1000);
  }

  p.genome_length = 50000;
  p.depth = 7;
  p.read_length = 3000;
  CHECK(simulate_reads(p).reads.size() == std::llround(50000.0 * 7 / 3000));
}

TEST_CASE("ground truth lists every pair above the threshold") {
  SimulationParams p;
  p.seed = 8;
  p.min_true_overlap = 300;
  auto sim = simulate_reads(p);
  std::set<std::pair<ReadId, ReadId>> truth(sim.true_overlaps.begin(), sim.true_overlaps.end());
  std::uint64_t want = 0;
  for (std::size_t i = 0; i < sim.reads.size(); ++i)
    for (std::size_t j = i + 1; j < sim.reads.size(); ++j) {
      const auto lo = std::max(sim.reads[i].genome_begin, sim.reads[j].genome_begin);
      const auto hi = std::min(sim.reads[i].genome_end, sim.reads[j].genome_end);
      if (hi >= lo + 300) {
        ++want;
        CHECK(truth.count({i, j}));
      }
    }
  CHECK(truth.size() == want);
}

TEST_CASE("metrics carry the documented keys and consistent rates") {
  const auto reads = desk_reads(0.1);
  auto cfg = small_config();
  Metrics m;
  run_inproc(4, [&](Comm& c) {
    auto out = run_rank(c, cfg, reads);
    if (c.rank() == 0) m = out.metrics;
  });
  for (const char* key : {"config.k", "config.m", "align.load_imbalance", "align.task_imbalance",
                          "table.iota_set", "table.iota_input", "overlap.bound_lower", "overlap.bound_exact",
                          "overlap.bound_upper", "exchange.peak_round_bytes", "bloom.fp_estimate_max"})
    CHECK_MESSAGE(m.get(key).has_value(), key);
  for (std::string stage : {"bloom", "table", "overlap", "align"}) {
    std::string items;
    for (const auto& [k, v] : m.entries())
      if (k.starts_with(stage + ".") && k.ends_with("_per_s")) items = k.substr(0, k.size() - 6);
    REQUIRE_MESSAGE(!items.empty(), stage);
    const double t = m.number(stage + ".time_s");
    REQUIRE(t > 0);
    CHECK(std::fabs(m.number(items + "_per_s") - m.number(items) / t) <= 1e-9 * std::max(1.0, m.number(items) / t));
  }
  CHECK(m.number("overlap.pairs") <= m.number("overlap.bound_exact"));
  CHECK(m.number("overlap.bound_exact") <= m.number("overlap.bound_upper"));
  CHECK(m.number("exchange.peak_round_bytes") <= m.number("exchange.round_cap"));

  std::ostringstream os;
  emit_metrics(m, os);
  for (const auto& line : split_lines(os.str())) CHECK(std::count(line.begin(), line.end(), '\t') == 1);
}

TEST_CASE("outputs are identical for every rank count, backend and arrival order") {
  const auto reads = desk_reads(0.1, 3);
  auto cfg = small_config();
  const auto base = run_all(&run_inproc, 1, cfg, reads);
  REQUIRE(base.overlaps.size() > 100);
  REQUIRE(base.alignments.size() >= base.overlaps.size());
  for (int ranks : {2, 4, 8}) {
    CAPTURE(ranks);
    auto got = run_all(&run_inproc, ranks, cfg, reads);
    CHECK(got.overlaps == base.overlaps);
    CHECK(got.alignments == base.alignments);
  }
  auto sock = run_all(&run_socket_threads, 4, cfg, reads);
  CHECK(sock.overlaps == base.overlaps);
  CHECK(sock.alignments == base.alignments);

  auto shuffled = run_all(&run_inproc, 4, cfg, reads, 1234);
  CHECK(shuffled.overlaps == base.overlaps);
  CHECK(shuffled.alignments == base.alignments);

  // A tiny cap forces many rounds without changing anything.
  cfg.round_cap = 4096;
  auto capped = run_all(&run_inproc, 4, cfg, reads);
  CHECK(capped.overlaps == base.overlaps);
  CHECK(capped.alignments == base.alignments);
}

TEST_CASE("run_pipeline writes rank files, merges them and reports metrics") {
  const auto dir = scratch("pipeline");
  const auto reads = desk_reads(0.1, 4);
  {
    std::ofstream f(dir / "reads.fq");
    write_fastq(f, reads);
  }
  auto cfg = small_config();
  cfg.inputs = {(dir / "reads.fq").string()};
  cfg.ranks = 3;
  cfg.merge_outputs = true;
  cfg.out_overlaps = (dir / "ov.tsv").string();
  cfg.out_alignments = (dir / "al.tsv").string();
  cfg.out_metrics = (dir / "metrics.tsv").string();
  cfg.out_histogram = (dir / "hist.tsv").string();
  auto m = run_pipeline(cfg);
  for (int r = 0; r < 3; ++r) {
    CHECK(fs::exists(rank_path(cfg.out_overlaps, r)));
    CHECK(fs::exists(rank_path(cfg.out_alignments, r)));
  }
  const auto expect = run_all(&run_inproc, 1, small_config(), reads);
  CHECK(split_lines(slurp(cfg.out_overlaps)) == expect.overlaps);
  CHECK(split_lines(slurp(cfg.out_alignments)) == expect.alignments);
  CHECK(slurp(cfg.out_metrics).find("table.iota_set\t") != std::string::npos);
  CHECK(!slurp(cfg.out_histogram).empty());
  CHECK(m.number("overlap.pairs") == static_cast<double>(expect.overlaps.size()));
  fs::remove_all(dir);
}

TEST_CASE("config validation and stage-tagged failures") {
  PipelineConfig cfg;
  cfg.inputs = {"x.fq"};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // m unset
  cfg.kmer.max_count = 10;
  CHECK_NOTHROW(cfg.validate());
  cfg.ranks = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.ranks = 2;
  cfg.bloom_fp = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  auto small = small_config();
  small.round_cap = 8;  // no k-mer record fits
  const auto reads = reads_from({"ACGTACGTACGTACGTACGTACGT"});
  try {
    run_inproc(1, [&](Comm& c) { run_rank(c, small, reads); });
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "bloom");
  }
}

TEST_CASE("canonical_sort orders by leading numeric fields") {
  std::vector<std::string> lines{"10\t2\tx", "9\t3\ty", "10\t1\tz", "9\t3\ta"};
  CHECK(canonical_sort(lines) == std::vector<std::string>{"9\t3\ta", "9\t3\ty", "10\t1\tz", "10\t2\tx"});
}
