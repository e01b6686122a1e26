// Command-line driver: `olap run` executes the overlap/alignment pipeline,
// `olap simulate` writes a synthetic FASTQ plus its true overlaps.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "olap/pipeline.hpp"
#include "olap/simulate.hpp"

namespace {

int run(const olap::PipelineConfig& config) {
  try {
    const auto metrics = olap::run_pipeline(config);
    if (config.out_metrics.empty()) olap::emit_metrics(metrics, std::cout);
    return 0;
  } catch (const olap::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed long-read overlapper and x-drop aligner"};
  app.require_subcommand(1);

  olap::PipelineConfig cfg;
  std::string backend = "inproc";
  std::size_t max_seeds = 0;
  auto* runc = app.add_subcommand("run", "Find overlapping read pairs and align them");
  runc->add_option("--input", cfg.inputs, "FASTQ input (repeatable, concatenated in order)")->required();
  runc->add_option("-k,--kmer-length", cfg.kmer.k, "k-mer length")->capture_default_str();
  runc->add_option("--max-kmer-freq", cfg.kmer.max_count, "Discard k-mers seen more than m times")->required();
  runc->add_option("--min-seed-distance", cfg.min_seed_distance, "Minimum spacing between explored seeds")
      ->capture_default_str();
  runc->add_option("--max-seeds", max_seeds, "Seeds explored per pair (0 = all)");
  runc->add_flag("--canonical", cfg.kmer.canonical, "Merge k-mers with their reverse complements");
  runc->add_option("--match", cfg.scoring.match)->capture_default_str();
  runc->add_option("--mismatch", cfg.scoring.mismatch)->capture_default_str();
  runc->add_option("--gap", cfg.scoring.gap)->capture_default_str();
  runc->add_option("--xdrop", cfg.scoring.x_drop)->capture_default_str();
  runc->add_option("--ranks", cfg.ranks, "Rank count (in-process backend)")->capture_default_str();
  runc->add_option("--backend", backend, "inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}))
      ->capture_default_str();
  runc->add_option("--hostfile", cfg.hostfile, "host:port per line, indexed by rank (socket backend)");
  runc->add_option("--rank", cfg.rank, "This process's rank (socket backend)");
  runc->add_option("--round-cap", cfg.round_cap, "Per-rank bytes per exchange round")->capture_default_str();
  runc->add_option("--bloom-fp", cfg.bloom_fp, "Bloom filter false-positive target")->capture_default_str();
  runc->add_option("--distinct-fraction", cfg.distinct_fraction, "Expected distinct share of parsed k-mers")
      ->capture_default_str();
  runc->add_option("--out-overlaps", cfg.out_overlaps, "Overlap output base path");
  runc->add_option("--out-alignments", cfg.out_alignments, "Alignment output base path");
  runc->add_option("--out-metrics", cfg.out_metrics, "Metrics report path (stdout when omitted)");
  runc->add_option("--histogram", cfg.out_histogram, "k-mer count histogram path");
  runc->add_flag("--best-per-pair", cfg.best_per_pair, "Report only the best-scoring seed per pair");
  runc->add_flag("--merge", cfg.merge_outputs, "Also write sorted, merged outputs at the base paths");
  runc->add_option("--threads", cfg.align_threads, "Alignment threads per rank")->capture_default_str();
  runc->add_option("--seed", cfg.seed, "Random seed recorded with the run")->capture_default_str();

  olap::SimulationParams sim;
  std::string sim_out, truth_out;
  auto* simc = app.add_subcommand("simulate", "Write synthetic reads and their true overlaps");
  simc->add_option("--genome-length", sim.genome_length)->capture_default_str();
  simc->add_option("--depth", sim.depth)->capture_default_str();
  simc->add_option("--read-length", sim.read_length)->capture_default_str();
  simc->add_option("--error-rate", sim.error_rate)->capture_default_str();
  simc->add_option("--seed", sim.seed)->capture_default_str();
  simc->add_option("--min-overlap", sim.min_true_overlap, "Truth threshold in genome bases")->capture_default_str();
  simc->add_option("--out", sim_out, "FASTQ output")->required();
  simc->add_option("--truth", truth_out, "True overlap list output");

  CLI11_PARSE(app, argc, argv);

  if (*runc) {
    cfg.backend = backend == "socket" ? olap::Backend::Socket : olap::Backend::InProc;
    cfg.max_seeds = max_seeds == 0 ? olap::kUnlimitedSeeds : max_seeds;
    return run(cfg);
  }

  try {
    const auto s = olap::simulate_reads(sim);
    std::ofstream fq(sim_out);
    if (!fq) throw std::runtime_error("cannot open '" + sim_out + "'");
    const auto reads = s.plain_reads();
    olap::write_fastq(fq, reads);
    if (!truth_out.empty()) {
      std::ofstream tr(truth_out);
      if (!tr) throw std::runtime_error("cannot open '" + truth_out + "'");
      olap::write_truth(tr, s);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
