#include "olap/bloom.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace olap {

namespace {
constexpr std::uint64_t kSeedH1 = 0xb100f11e7e51ULL;
constexpr std::uint64_t kSeedH2 = 0x5ec0dd4a54ULL;
}  // namespace

BloomSize size_bloom(double expected_n, double target_fp) {
  if (!(expected_n > 0)) throw std::invalid_argument("expected element count must be positive");
  if (!(target_fp > 0 && target_fp < 1)) throw std::invalid_argument("false-positive target must be in (0,1)");
  const double ln2 = std::log(2.0);
  BloomSize s;
  s.bits = static_cast<std::uint64_t>(std::ceil(-expected_n * std::log(target_fp) / (ln2 * ln2)));
  s.bits = std::max<std::uint64_t>(s.bits, 1);
  s.hashes = static_cast<int>(std::lround(static_cast<double>(s.bits) / expected_n * ln2));
  s.hashes = std::clamp(s.hashes, 1, 16);
  return s;
}

BloomFilter::BloomFilter(BloomSize size)
    : nbits_(size.bits), hashes_(size.hashes), words_((size.bits + 63) / 64, 0) {
  if (nbits_ == 0) throw std::invalid_argument("bloom filter needs at least one bit");
  if (hashes_ < 1 || hashes_ > 16) throw std::invalid_argument("bloom hash count must be in [1,16]");
}

bool BloomFilter::insert_and_test(const Kmer& kmer) {
  const std::uint64_t h1 = kmer.hash(kSeedH1);
  const std::uint64_t h2 = kmer.hash(kSeedH2) | 1;
  bool present = true;
  for (int i = 0; i < hashes_; ++i) {
    const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % nbits_;
    auto& w = words_[bit / 64];
    const std::uint64_t mask = std::uint64_t{1} << (bit % 64);
    if (!(w & mask)) {
      present = false;
      w |= mask;
    }
  }
  ++inserted_;
  return present;
}

bool BloomFilter::contains(const Kmer& kmer) const {
  const std::uint64_t h1 = kmer.hash(kSeedH1);
  const std::uint64_t h2 = kmer.hash(kSeedH2) | 1;
  for (int i = 0; i < hashes_; ++i) {
    const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % nbits_;
    if (!(words_[bit / 64] & (std::uint64_t{1} << (bit % 64)))) return false;
  }
  return true;
}

std::uint64_t BloomFilter::bits_set() const {
  std::uint64_t n = 0;
  for (auto w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
  return n;
}

double BloomFilter::estimated_fp() const {
  return std::pow(static_cast<double>(bits_set()) / static_cast<double>(nbits_), hashes_);
}

double BloomFilter::estimated_distinct() const {
  const double b = static_cast<double>(nbits_);
  const double set = static_cast<double>(bits_set());
  if (set >= b) return static_cast<double>(inserted_);
  return -(b / hashes_) * std::log1p(-set / b);
}

BloomStageResult run_bloom_stage(Comm& comm, std::span<const Read> local_reads, const KmerParams& params,
                                 const BloomStageOptions& options) {
  const int p = comm.size();
  std::uint64_t local_bases = 0;
  for (const auto& r : local_reads) local_bases += r.length();
  const std::uint64_t total_bases = comm.all_reduce_sum(local_bases);
  const std::uint64_t total_reads = comm.all_reduce_sum(static_cast<std::uint64_t>(local_reads.size()));

  DatasetModel model;
  model.genome_size = static_cast<double>(total_bases);  // G*d is all that matters here
  model.depth = 1;
  model.mean_read_length = total_reads ? static_cast<double>(total_bases) / total_reads : 0;
  double expected = 0;
  if (model.mean_read_length > params.k) expected = estimate_cardinality(model, params.k);
  expected = std::max(1.0, expected * options.distinct_fraction / p);

  BloomStageResult result;
  result.size = size_bloom(expected, options.target_fp);
  BloomFilter filter(result.size);

  // Walk reads and windows lazily so only one round is buffered at a time.
  std::size_t read_idx = 0;
  std::vector<KmerOccurrence> window;
  std::size_t window_pos = 0;
  std::vector<std::uint8_t> record(Kmer::kBytes);

  auto next = [&](ItemSink& sink) -> bool {
    while (window_pos == window.size()) {
      if (read_idx == local_reads.size()) return false;
      window = extract_kmers(local_reads[read_idx++].bases, params);
      window_pos = 0;
    }
    const auto& km = window[window_pos++].kmer;
    km.copy_to(record.data());
    sink.put(owner_of(km, p), record);
    ++result.kmers_sent;
    return true;
  };
  auto deliver = [&](int, std::span<const std::uint8_t> item) {
    if (item.size() != Kmer::kBytes) throw CommAborted("malformed k-mer record");
    const auto km = Kmer::copy_from(item.data(), params.k);
    ++result.kmers_received;
    if (filter.insert_and_test(km)) result.candidates.insert(km);
  };
  result.rounds = staged_stream(comm, options.round_cap, next, deliver).rounds;
  result.estimated_fp = filter.estimated_fp();
  result.estimated_distinct = filter.estimated_distinct();
  return result;
}

}  // namespace olap
