#include "olap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace olap {

namespace {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// sampling is done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  char base() { return "ACGT"[below(4)]; }

 private:
  std::mt19937_64 gen_;
};

std::uint64_t shared_bases(const SimulatedRead& a, const SimulatedRead& b) {
  const auto lo = std::max(a.genome_begin, b.genome_begin);
  const auto hi = std::min(a.genome_end, b.genome_end);
  return hi > lo ? hi - lo : 0;
}

}  // namespace

std::vector<Read> Simulation::plain_reads() const {
  std::vector<Read> out;
  out.reserve(reads.size());
  for (const auto& r : reads) out.push_back(r.read);
  return out;
}

Simulation simulate_reads(const SimulationParams& p) {
  if (p.genome_length == 0 || p.read_length == 0 || !(p.depth > 0))
    throw std::invalid_argument("simulation sizes must be positive");
  if (p.read_length > p.genome_length) throw std::invalid_argument("read length exceeds genome length");
  if (p.error_rate < 0 || p.error_rate >= 1) throw std::invalid_argument("error rate must be in [0,1)");

  Rng rng(p.seed);
  Simulation sim;
  sim.genome.resize(p.genome_length);
  for (auto& c : sim.genome) c = rng.base();

  const auto count = static_cast<std::uint64_t>(
      std::llround(static_cast<double>(p.genome_length) * p.depth / p.read_length));
  const std::uint64_t span = p.genome_length - p.read_length + 1;
  sim.reads.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    SimulatedRead sr;
    sr.genome_begin = rng.below(span);
    sr.genome_end = sr.genome_begin + p.read_length;
    std::string& bases = sr.read.bases;
    bases.reserve(p.read_length + p.read_length / 8);
    for (auto g = sr.genome_begin; g < sr.genome_end; ++g) {
      const char truth = sim.genome[g];
      if (p.error_rate > 0 && rng.unit() < p.error_rate) {
        switch (rng.below(3)) {
          case 0: {  // substitution
            char c;
            do c = rng.base(); while (c == truth);
            bases.push_back(c);
            break;
          }
          case 1:  // insertion before the true base
            bases.push_back(rng.base());
            bases.push_back(truth);
            break;
          default:  // deletion
            break;
        }
      } else {
        bases.push_back(truth);
      }
    }
    sr.read.rid = i;
    sr.read.name = "sim" + std::to_string(i) + " start=" + std::to_string(sr.genome_begin) +
                   " end=" + std::to_string(sr.genome_end);
    sim.reads.push_back(std::move(sr));
  }

  for (std::size_t a = 0; a < sim.reads.size(); ++a)
    for (std::size_t b = a + 1; b < sim.reads.size(); ++b)
      if (shared_bases(sim.reads[a], sim.reads[b]) >= std::max<std::uint32_t>(p.min_true_overlap, 1))
        sim.true_overlaps.emplace_back(a, b);
  return sim;
}

void write_truth(std::ostream& out, const Simulation& sim) {
  for (const auto& [a, b] : sim.true_overlaps)
    out << a << '\t' << b << '\t' << shared_bases(sim.reads[a], sim.reads[b]) << '\n';
}

}  // namespace olap
