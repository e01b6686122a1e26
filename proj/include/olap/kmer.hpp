#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#ifndef OLAP_KMER_WORDS
#define OLAP_KMER_WORDS 1
#endif

namespace olap {

// 2-bit base codes; the order A<C<G<T makes packed order lexicographic.
inline constexpr std::uint8_t kBaseA = 0, kBaseC = 1, kBaseG = 2, kBaseT = 3;
inline constexpr std::uint8_t kInvalidBase = 0xff;

constexpr std::uint8_t encode_base(char c) {
  switch (c) {
    case 'A': case 'a': return kBaseA;
    case 'C': case 'c': return kBaseC;
    case 'G': case 'g': return kBaseG;
    case 'T': case 't': return kBaseT;
    default: return kInvalidBase;
  }
}

constexpr char decode_base(std::uint8_t code) { return "ACGT"[code & 3]; }

// splitmix64 finalizer. Owner assignment depends on this exact function:
// changing it reassigns k-mers to different ranks.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// k bases packed most-significant-first into Words 64-bit words. Bits past
// base k-1 are always zero, so comparing words compares base strings.
template <std::size_t Words>
class BasicKmer {
 public:
  static constexpr std::size_t kWords = Words;
  static constexpr int kMaxK = static_cast<int>(32 * Words);
  static constexpr std::size_t kBytes = 8 * Words;

  BasicKmer() = default;
  explicit BasicKmer(int k) : k_(static_cast<std::uint32_t>(k)) {
    if (k < 1 || k > kMaxK) throw std::invalid_argument("k-mer length out of range");
  }

  int k() const { return static_cast<int>(k_); }
  const std::array<std::uint64_t, Words>& words() const { return words_; }

  std::uint8_t base(int i) const {
    return static_cast<std::uint8_t>((words_[i / 32] >> shift(i)) & 3);
  }

  void set_base(int i, std::uint8_t code) {
    auto& w = words_[i / 32];
    w = (w & ~(std::uint64_t{3} << shift(i))) | (std::uint64_t{code} << shift(i));
  }

  // Drops base 0 and appends `code` as base k-1.
  void push_back(std::uint8_t code) {
    for (std::size_t w = 0; w < Words; ++w) {
      words_[w] <<= 2;
      if (w + 1 < Words) words_[w] |= words_[w + 1] >> 62;
    }
    set_base(k() - 1, code);
  }

  // Drops base k-1 and prepends `code` as base 0.
  void push_front(std::uint8_t code) {
    for (std::size_t w = Words; w-- > 0;) {
      words_[w] >>= 2;
      if (w > 0) words_[w] |= words_[w - 1] << 62;
    }
    if (static_cast<std::size_t>(k()) < 32 * Words) set_base(k(), 0);
    set_base(0, code);
  }

  std::uint64_t hash(std::uint64_t seed) const {
    std::uint64_t h = mix64(seed ^ k_);
    for (auto w : words_) h = mix64(h ^ w);
    return h;
  }

  std::string to_string() const {
    std::string s(k_, 'A');
    for (int i = 0; i < k(); ++i) s[i] = decode_base(base(i));
    return s;
  }

  // Big-endian byte image; byte order equals the packed total order.
  void copy_to(std::uint8_t* out) const {
    for (std::size_t w = 0; w < Words; ++w)
      for (int b = 0; b < 8; ++b) out[8 * w + b] = static_cast<std::uint8_t>(words_[w] >> (56 - 8 * b));
  }
  static BasicKmer copy_from(const std::uint8_t* in, int k) {
    BasicKmer km(k);
    for (std::size_t w = 0; w < Words; ++w) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v = (v << 8) | in[8 * w + b];
      km.words_[w] = v;
    }
    return km;
  }

  friend bool operator==(const BasicKmer&, const BasicKmer&) = default;
  friend std::strong_ordering operator<=>(const BasicKmer& a, const BasicKmer& b) {
    if (auto c = a.words_ <=> b.words_; c != 0) return c;
    return a.k_ <=> b.k_;
  }

 private:
  static int shift(int i) { return 62 - 2 * (i % 32); }

  std::array<std::uint64_t, Words> words_{};
  std::uint32_t k_ = 0;
};

using Kmer = BasicKmer<OLAP_KMER_WORDS>;

struct KmerHasher {
  std::size_t operator()(const Kmer& km) const { return km.hash(0x6b6d6572ULL); }
};

struct KmerParams {
  int k = 17;
  std::uint32_t min_count = 2;  // reliability lower bound, fixed
  std::uint32_t max_count = 0;  // m: counts above this are repeats
  bool canonical = false;

  // Throws std::invalid_argument when out of range.
  void validate() const;
};

struct KmerOccurrence {
  Kmer kmer;
  std::uint32_t position = 0;
};

// Returns nullopt when `bases` has a non-ACGT character or the wrong length.
std::optional<Kmer> pack(std::string_view bases);
std::string unpack(const Kmer& kmer);
Kmer reverse_complement(const Kmer& kmer);
std::string reverse_complement(std::string_view bases);

// One entry per N-free window, at the window start. Canonical mode keeps
// the smaller of the window and its reverse complement.
std::vector<KmerOccurrence> extract_kmers(std::string_view bases, const KmerParams& params);

// Calls fn(kmer, position) for each window without materialising a list.
template <typename Fn>
void for_each_kmer(std::string_view bases, const KmerParams& params, Fn&& fn) {
  const int k = params.k;
  if (bases.size() < static_cast<std::size_t>(k)) return;
  Kmer fwd(k), rev(k);
  int valid = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto code = encode_base(bases[i]);
    if (code == kInvalidBase) {
      valid = 0;
      continue;
    }
    fwd.push_back(code);
    if (params.canonical) rev.push_front(static_cast<std::uint8_t>(3 - code));
    if (++valid >= k) {
      const auto pos = static_cast<std::uint32_t>(i + 1 - k);
      if (params.canonical)
        fn(rev < fwd ? rev : fwd, pos);
      else
        fn(fwd, pos);
    }
  }
}

inline constexpr std::uint64_t kOwnerHashSeed = 0x0a11ce5eedULL;

// Rank that owns `kmer` in every stage.
inline int owner_of(const Kmer& kmer, int ranks) {
  return static_cast<int>(kmer.hash(kOwnerHashSeed) % static_cast<std::uint64_t>(ranks));
}

// Genome size G, depth d and mean read length L; N = G*d input bases.
struct DatasetModel {
  double genome_size = 0;
  double depth = 0;
  double mean_read_length = 0;

  double input_size() const { return genome_size * depth; }
  double read_count() const { return input_size() / mean_read_length; }
};

// Expected number of parsed k-mers: G*d*(L-k+1)/L.
double estimate_cardinality(const DatasetModel& model, int k);
// The G*d simplification used when k is small relative to L.
inline double approximate_cardinality(const DatasetModel& model) { return model.input_size(); }

}  // namespace olap
