#include "olap/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <fstream>
#include <sstream>

namespace olap {

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  kmer.validate();
  scoring.validate();
  if (inputs.empty()) throw std::invalid_argument("at least one --input is required");
  if (ranks < 1) throw std::invalid_argument("--ranks must be >= 1");
  if (max_seeds == 0) throw std::invalid_argument("--max-seeds must be >= 1");
  if (round_cap < 64) throw std::invalid_argument("--round-cap must be at least 64 bytes");
  if (!(bloom_fp > 0 && bloom_fp < 1)) throw std::invalid_argument("--bloom-fp must be in (0,1)");
  if (!(distinct_fraction > 0 && distinct_fraction <= 1))
    throw std::invalid_argument("distinct fraction must be in (0,1]");
  if (align_threads < 1) throw std::invalid_argument("alignment threads must be >= 1");
  if (backend == Backend::Socket && hostfile.empty()) throw std::invalid_argument("--backend socket needs --hostfile");
  if (rank < 0) throw std::invalid_argument("--rank must be >= 0");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> e;
  std::string joined;
  for (const auto& in : inputs) joined += (joined.empty() ? "" : ",") + in;
  e.emplace_back("config.inputs", joined);
  e.emplace_back("config.k", std::to_string(kmer.k));
  e.emplace_back("config.m", std::to_string(kmer.max_count));
  e.emplace_back("config.canonical", kmer.canonical ? "1" : "0");
  e.emplace_back("config.min_seed_distance", std::to_string(min_seed_distance));
  e.emplace_back("config.max_seeds", max_seeds == kUnlimitedSeeds ? "all" : std::to_string(max_seeds));
  e.emplace_back("config.match", std::to_string(scoring.match));
  e.emplace_back("config.mismatch", std::to_string(scoring.mismatch));
  e.emplace_back("config.gap", std::to_string(scoring.gap));
  e.emplace_back("config.xdrop", std::to_string(scoring.x_drop));
  e.emplace_back("config.ranks", std::to_string(ranks));
  e.emplace_back("config.backend", backend == Backend::Socket ? "socket" : "inproc");
  e.emplace_back("config.round_cap", std::to_string(round_cap));
  e.emplace_back("config.bloom_fp", std::to_string(bloom_fp));
  e.emplace_back("config.distinct_fraction", std::to_string(distinct_fraction));
  e.emplace_back("config.best_per_pair", best_per_pair ? "1" : "0");
  e.emplace_back("config.seed", std::to_string(seed));
  return e;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 9.007199254740992e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Metrics::set(const std::string& key, double value) { set(key, format_number(value)); }

void Metrics::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

std::optional<std::string> Metrics::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

double Metrics::number(const std::string& key) const {
  auto v = get(key);
  if (!v) throw std::out_of_range("metric '" + key + "' not recorded");
  return std::stod(*v);
}

void emit_metrics(const Metrics& metrics, std::ostream& out) {
  for (const auto& [k, v] : metrics.entries()) out << k << '\t' << v << '\n';
}

void emit_metrics(const Metrics& metrics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open metrics file '" + path + "'");
  emit_metrics(metrics, out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing metrics file '" + path + "'");
}

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(stage + " stage failed: " + what), stage_(std::move(stage)) {}

// ---------------------------------------------------------------------------
// One rank

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<double> gather_doubles(Comm& comm, double v) {
  auto raw = comm.all_gather(std::bit_cast<std::uint64_t>(v));
  std::vector<double> out;
  out.reserve(raw.size());
  for (auto r : raw) out.push_back(std::bit_cast<double>(r));
  return out;
}

// Records time, item count and rate for a stage from per-rank values.
void record_stage(Comm& comm, Metrics& m, const std::string& stage, double local_time, std::uint64_t local_items,
                  std::uint64_t local_bytes, const std::string& item_name) {
  const auto times = gather_doubles(comm, local_time);
  const double tmax = *std::max_element(times.begin(), times.end());
  double tsum = 0;
  for (double t : times) tsum += t;
  const auto items = comm.all_gather(local_items);
  std::uint64_t isum = 0, imax = 0;
  for (auto i : items) {
    isum += i;
    imax = std::max(imax, i);
  }
  const std::uint64_t bytes = comm.all_reduce_sum(local_bytes);
  m.set(stage + ".time_s", tmax);
  m.set(stage + ".time_s_mean", tsum / static_cast<double>(times.size()));
  m.set(stage + "." + item_name, static_cast<double>(isum));
  m.set(stage + "." + item_name + "_rank_max", static_cast<double>(imax));
  m.set(stage + "." + item_name + "_per_s", tmax > 0 ? static_cast<double>(isum) / tmax : 0.0);
  m.set(stage + ".bytes_exchanged", static_cast<double>(bytes));
}

void write_lines_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

RankOutcome run_rank(Comm& comm, const PipelineConfig& config, std::span<const Read> all_reads) {
  config.kmer.validate();
  config.scoring.validate();
  comm.set_round_cap(config.round_cap);
  comm.reset_stats();
  const int p = comm.size();
  const int self = comm.rank();

  for (std::size_t i = 0; i < all_reads.size(); ++i)
    if (all_reads[i].rid != i) throw std::invalid_argument("reads must be in rid order starting at 0");
  const ReadPartition partition = partition_reads(all_reads, p);
  const RidRange mine = partition.range(self);
  const auto local = all_reads.subspan(mine.begin, mine.size());

  RankOutcome out;
  Metrics& m = out.metrics;
  for (const auto& [k, v] : config.echo()) m.set(k, v);
  m.set("input.reads", static_cast<double>(all_reads.size()));
  m.set("input.ranks", p);
  const auto t_all = Clock::now();

  // Stage 1: Bloom filter.
  auto t0 = Clock::now();
  std::uint64_t bytes0 = comm.stats().bytes_sent;
  BloomStageOptions bopt;
  bopt.target_fp = config.bloom_fp;
  bopt.distinct_fraction = config.distinct_fraction;
  bopt.round_cap = config.round_cap;
  BloomStageResult bloom = run_stage("bloom", [&] { return run_bloom_stage(comm, local, config.kmer, bopt); });
  const double bloom_time = seconds_since(t0);
  const std::uint64_t bloom_bytes = comm.stats().bytes_sent - bytes0;

  // Stage 2: hash table.
  t0 = Clock::now();
  bytes0 = comm.stats().bytes_sent;
  TableStageResult table = run_stage("table", [&] {
    return run_table_stage(comm, local, bloom.candidates, config.kmer, config.round_cap);
  });
  const double table_time = seconds_since(t0);
  const std::uint64_t table_bytes = comm.stats().bytes_sent - bytes0;
  bloom.candidates.clear();

  // Stage 3: overlap.
  t0 = Clock::now();
  bytes0 = comm.stats().bytes_sent;
  OverlapStageResult overlap = run_stage("overlap", [&] {
    return run_overlap_stage(comm, table.table, partition, config.round_cap);
  });
  std::vector<OverlapTask> filtered;
  filtered.reserve(overlap.tasks.size());
  for (const auto& t : overlap.tasks) filtered.push_back(filter_seeds(t, config.min_seed_distance, config.max_seeds));
  const double overlap_time = seconds_since(t0);
  const std::uint64_t overlap_bytes = comm.stats().bytes_sent - bytes0;

  // Stage 4: read exchange and alignment.
  t0 = Clock::now();
  bytes0 = comm.stats().bytes_sent;
  FetchStats fetch;
  AlignStageResult aligned = run_stage("align", [&] {
    ReadCache cache = fetch_reads(comm, filtered, local, partition, config.round_cap, &fetch);
    AlignOptions aopt;
    aopt.scoring = config.scoring;
    aopt.k = config.kmer.k;
    aopt.canonical = config.kmer.canonical;
    aopt.with_transcript = config.with_transcript;
    aopt.best_per_pair = config.best_per_pair;
    aopt.threads = config.align_threads;
    return run_alignment_stage(filtered, cache, aopt);
  });
  const double align_time = seconds_since(t0);
  const std::uint64_t align_bytes = comm.stats().bytes_sent - bytes0;

  // Global metrics; every rank takes part in the reductions.
  record_stage(comm, m, "bloom", bloom_time, bloom.kmers_sent, bloom_bytes, "kmers");
  m.set("bloom.bits", static_cast<double>(comm.all_reduce_sum(bloom.size.bits)));
  m.set("bloom.hashes", bloom.size.hashes);
  m.set("bloom.fp_estimate_max", comm.all_reduce_max(bloom.estimated_fp));
  m.set("bloom.candidates", static_cast<double>(comm.all_reduce_sum(table.candidate_keys)));
  m.set("bloom.rounds", static_cast<double>(bloom.rounds));

  record_stage(comm, m, "table", table_time, table.kmers_sent, table_bytes, "kmers");
  const std::uint64_t k_input = comm.all_reduce_sum(table.kmers_sent);
  const std::uint64_t retained = comm.all_reduce_sum(static_cast<std::uint64_t>(table.table.size()));
  const double k_set = comm.all_reduce_sum(bloom.estimated_distinct);
  m.set("table.k_input", static_cast<double>(k_input));
  m.set("table.k_set_estimate", k_set);
  m.set("table.retained", static_cast<double>(retained));
  m.set("table.iota_input", k_input ? static_cast<double>(retained) / static_cast<double>(k_input) : 0.0);
  m.set("table.iota_set", k_set > 0 ? static_cast<double>(retained) / k_set : 0.0);

  record_stage(comm, m, "overlap", overlap_time, table.table.size(), overlap_bytes, "retained_kmers");
  const PairBounds local_bounds = compute_bounds(table.table.histogram(), config.kmer.max_count);
  const std::uint64_t raw = comm.all_reduce_sum(overlap.tasks_sent);
  std::uint64_t local_seeds = 0;
  for (const auto& t : overlap.tasks) local_seeds += t.seeds.size();
  m.set("overlap.raw_pairs", static_cast<double>(comm.all_reduce_sum(overlap.raw_pairs)));
  m.set("overlap.self_pairs", static_cast<double>(comm.all_reduce_sum(overlap.self_pairs)));
  m.set("overlap.tasks_exchanged", static_cast<double>(raw));
  m.set("overlap.pairs", static_cast<double>(comm.all_reduce_sum(static_cast<std::uint64_t>(overlap.tasks.size()))));
  m.set("overlap.seeds", static_cast<double>(comm.all_reduce_sum(local_seeds)));
  m.set("overlap.bound_lower", static_cast<double>(comm.all_reduce_sum(local_bounds.lower)));
  m.set("overlap.bound_exact", static_cast<double>(comm.all_reduce_sum(local_bounds.exact)));
  m.set("overlap.bound_upper", static_cast<double>(comm.all_reduce_sum(local_bounds.upper)));

  record_stage(comm, m, "align", align_time, aligned.alignments.size(), align_bytes, "alignments");
  const auto align_times = gather_doubles(comm, align_time);
  const auto task_counts = gather_doubles(comm, static_cast<double>(filtered.size()));
  m.set("align.tasks", static_cast<double>(comm.all_reduce_sum(static_cast<std::uint64_t>(filtered.size()))));
  m.set("align.seeds", static_cast<double>(comm.all_reduce_sum(aligned.seeds)));
  m.set("align.load_imbalance", load_imbalance(align_times));
  m.set("align.task_imbalance", load_imbalance(task_counts));
  m.set("align.reads_fetched", static_cast<double>(comm.all_reduce_sum(fetch.requests_sent)));
  m.set("align.skipped_opposite_strand", static_cast<double>(comm.all_reduce_sum(aligned.skipped_opposite_strand)));

  const std::uint64_t peak = comm.all_reduce_max(comm.stats().peak_round_bytes);
  if (peak > config.round_cap) throw StageError("exchange", "round payload exceeded the configured cap");
  m.set("exchange.peak_round_bytes", static_cast<double>(peak));
  m.set("exchange.round_cap", static_cast<double>(config.round_cap));
  m.set("total.time_s", comm.all_reduce_max(seconds_since(t_all)));

  out.table = std::move(table.table);
  out.overlaps = std::move(overlap.tasks);
  out.alignments = std::move(aligned.alignments);

  if (!config.out_histogram.empty()) {
    // Sum per-rank histograms at rank 0.
    auto it = table.histogram.begin();
    std::map<std::uint64_t, std::uint64_t> hist;
    staged_stream(
        comm, config.round_cap,
        [&](ItemSink& sink) {
          if (it == table.histogram.end()) return false;
          const std::uint64_t pair[2] = {it->first, it->second};
          ++it;
          sink.put_pod(0, pair);
          return true;
        },
        [&](int, std::span<const std::uint8_t> item) {
          std::uint64_t pair[2];
          std::memcpy(pair, item.data(), sizeof(pair));
          hist[pair[0]] += pair[1];
        });
    if (self == 0) {
      std::ostringstream ss;
      write_histogram(ss, hist);
      write_lines_file(config.out_histogram, ss.str());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs

std::string rank_path(const std::string& base, int rank) { return base + ".rank" + std::to_string(rank); }

std::vector<std::string> canonical_sort(std::vector<std::string> lines) {
  auto key = [](const std::string& line) {
    std::vector<long long> nums;
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto tab = line.find('\t', pos);
      auto field = line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
      char* end = nullptr;
      const long long v = std::strtoll(field.c_str(), &end, 10);
      if (field.empty() || *end != '\0') break;
      nums.push_back(v);
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    return nums;
  };
  std::vector<std::pair<std::vector<long long>, std::string>> keyed;
  keyed.reserve(lines.size());
  for (auto& l : lines) keyed.emplace_back(key(l), std::move(l));
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  out.reserve(keyed.size());
  for (auto& [k, l] : keyed) out.push_back(std::move(l));
  return out;
}

void merge_rank_outputs(const std::string& base, int ranks, const std::string& out_path) {
  std::vector<std::string> lines;
  for (int r = 0; r < ranks; ++r) {
    std::ifstream in(rank_path(base, r));
    if (!in) throw std::runtime_error("cannot open rank output '" + rank_path(base, r) + "'");
    std::string line;
    while (std::getline(in, line)) lines.push_back(std::move(line));
  }
  std::string text;
  for (const auto& l : canonical_sort(std::move(lines))) text += l + '\n';
  write_lines_file(out_path, text);
}

namespace {

void write_rank_outputs(Comm& comm, const PipelineConfig& config, const RankOutcome& outcome) {
  const int self = comm.rank();
  if (!config.out_overlaps.empty()) {
    std::ostringstream ss;
    write_overlaps(ss, outcome.overlaps);
    write_lines_file(rank_path(config.out_overlaps, self), ss.str());
  }
  if (!config.out_alignments.empty()) {
    std::ostringstream ss;
    write_alignments(ss, outcome.alignments);
    write_lines_file(rank_path(config.out_alignments, self), ss.str());
  }
  comm.barrier();
  if (self == 0) {
    if (config.merge_outputs) {
      if (!config.out_overlaps.empty())
        merge_rank_outputs(config.out_overlaps, comm.size(), config.out_overlaps);
      if (!config.out_alignments.empty())
        merge_rank_outputs(config.out_alignments, comm.size(), config.out_alignments);
    }
    if (!config.out_metrics.empty()) emit_metrics(outcome.metrics, config.out_metrics);
  }
}

}  // namespace

Metrics run_pipeline(const PipelineConfig& config) {
  config.validate();
  const std::vector<Read> reads = run_stage("input", [&] { return load_fastq_files(config.inputs); });

  Metrics result;
  if (config.backend == Backend::InProc) {
    run_inproc(config.ranks, [&](Comm& comm) {
      RankOutcome outcome = run_rank(comm, config, reads);
      write_rank_outputs(comm, config, outcome);
      if (comm.rank() == 0) result = outcome.metrics;
    });
  } else {
    auto hosts = read_hostfile(config.hostfile);
    if (config.ranks != 1 && static_cast<int>(hosts.size()) != config.ranks)
      throw std::invalid_argument("--ranks disagrees with the hostfile's " + std::to_string(hosts.size()) + " entries");
    PipelineConfig effective = config;
    effective.ranks = static_cast<int>(hosts.size());
    if (config.rank >= effective.ranks) throw std::invalid_argument("--rank is not listed in the hostfile");
    SocketComm comm(std::move(hosts), config.rank);
    RankOutcome outcome = run_rank(comm, effective, reads);
    write_rank_outputs(comm, effective, outcome);
    result = outcome.metrics;
  }
  return result;
}

}  // namespace olap
