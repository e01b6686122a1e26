#include "olap/kmer.hpp"

#include <algorithm>

namespace olap {

void KmerParams::validate() const {
  if (k < 2 || k > Kmer::kMaxK)
    throw std::invalid_argument("k must be in [2, " + std::to_string(Kmer::kMaxK) + "], got " +
                                std::to_string(k));
  if (min_count != 2) throw std::invalid_argument("min_count is fixed at 2");
  if (max_count < 2) throw std::invalid_argument("max k-mer frequency m must be >= 2");
}

std::optional<Kmer> pack(std::string_view bases) {
  if (bases.empty() || bases.size() > static_cast<std::size_t>(Kmer::kMaxK)) return std::nullopt;
  Kmer km(static_cast<int>(bases.size()));
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto code = encode_base(bases[i]);
    if (code == kInvalidBase) return std::nullopt;
    km.set_base(static_cast<int>(i), code);
  }
  return km;
}

std::string unpack(const Kmer& kmer) { return kmer.to_string(); }

Kmer reverse_complement(const Kmer& kmer) {
  Kmer rc(kmer.k());
  const int k = kmer.k();
  for (int i = 0; i < k; ++i) rc.set_base(k - 1 - i, static_cast<std::uint8_t>(3 - kmer.base(i)));
  return rc;
}

std::string reverse_complement(std::string_view bases) {
  std::string out(bases.rbegin(), bases.rend());
  for (auto& c : out) {
    switch (c) {
      case 'A': c = 'T'; break;
      case 'C': c = 'G'; break;
      case 'G': c = 'C'; break;
      case 'T': c = 'A'; break;
      default: break;
    }
  }
  return out;
}

std::vector<KmerOccurrence> extract_kmers(std::string_view bases, const KmerParams& params) {
  std::vector<KmerOccurrence> out;
  if (bases.size() >= static_cast<std::size_t>(params.k)) out.reserve(bases.size() - params.k + 1);
  for_each_kmer(bases, params, [&](const Kmer& km, std::uint32_t pos) { out.push_back({km, pos}); });
  return out;
}

double estimate_cardinality(const DatasetModel& model, int k) {
  const double L = model.mean_read_length;
  return model.input_size() * (L - k + 1) / L;
}

}  // namespace olap
