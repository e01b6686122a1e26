#include "olap/seq_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace olap {

ParseError::ParseError(std::size_t record, const std::string& what)
    : std::runtime_error("FASTQ record " + std::to_string(record) + ": " + what),
      record_(record) {}

namespace {

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

std::vector<Read> parse_fastq(std::istream& in, ReadId first_rid) {
  std::vector<Read> reads;
  std::string header, seq, plus, qual;
  std::size_t record = 0;
  while (next_line(in, header)) {
    if (header.empty() && in.peek() == std::char_traits<char>::eof()) break;
    if (header.empty() || header[0] != '@') throw ParseError(record, "header must start with '@'");
    if (!next_line(in, seq)) throw ParseError(record, "missing sequence line");
    if (!next_line(in, plus)) throw ParseError(record, "missing '+' line");
    if (plus.empty() || plus[0] != '+') throw ParseError(record, "separator must start with '+'");
    if (!next_line(in, qual)) throw ParseError(record, "missing quality line");
    if (qual.size() != seq.size())
      throw ParseError(record, "quality length " + std::to_string(qual.size()) +
                                   " != sequence length " + std::to_string(seq.size()));
    Read r;
    r.rid = first_rid + record;
    r.name = header.substr(1);
    r.bases = std::move(seq);
    std::transform(r.bases.begin(), r.bases.end(), r.bases.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    reads.push_back(std::move(r));
    seq.clear();
    ++record;
  }
  return reads;
}

std::vector<Read> parse_fastq(std::string_view text, ReadId first_rid) {
  std::istringstream in{std::string(text)};
  return parse_fastq(in, first_rid);
}

std::vector<Read> load_fastq_files(std::span<const std::string> paths) {
  std::vector<Read> all;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input '" + path + "'");
    auto reads = parse_fastq(in, all.size());
    all.insert(all.end(), std::make_move_iterator(reads.begin()),
               std::make_move_iterator(reads.end()));
  }
  return all;
}

void write_fastq(std::ostream& out, std::span<const Read> reads) {
  for (const auto& r : reads) {
    out << '@' << (r.name.empty() ? "r" + std::to_string(r.rid) : r.name) << '\n'
        << r.bases << "\n+\n"
        << std::string(r.bases.size(), 'I') << '\n';
  }
}

ReadPartition::ReadPartition(std::vector<RidRange> ranges, std::vector<std::uint64_t> bases)
    : ranges_(std::move(ranges)), bases_(std::move(bases)) {}

int ReadPartition::owner(ReadId rid) const {
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), rid,
                             [](ReadId v, const RidRange& r) { return v < r.end; });
  // Empty ranges share their end with a predecessor; skip to a range holding rid.
  while (it != ranges_.end() && !it->contains(rid)) ++it;
  if (it == ranges_.end()) throw std::out_of_range("rid " + std::to_string(rid) + " not partitioned");
  return static_cast<int>(it - ranges_.begin());
}

ReadPartition partition_reads(std::span<const std::uint64_t> lengths, int ranks) {
  if (ranks <= 0) throw std::invalid_argument("rank count must be positive");
  const auto p = static_cast<std::uint64_t>(ranks);
  std::uint64_t total = 0;
  for (auto len : lengths) total += len;

  std::vector<RidRange> ranges(ranks);
  std::vector<std::uint64_t> bases(ranks, 0);
  ReadId next = 0;
  std::uint64_t prefix = 0;
  const ReadId n = lengths.size();
  for (int r = 0; r < ranks; ++r) {
    ranges[r].begin = next;
    if (r == ranks - 1) {
      while (next < n) prefix += lengths[next++];
    } else {
      const auto target = static_cast<unsigned __int128>(total) * (r + 1);
      while (next < n && static_cast<unsigned __int128>(prefix) * p < target) prefix += lengths[next++];
    }
    ranges[r].end = next;
    for (ReadId i = ranges[r].begin; i < next; ++i) bases[r] += lengths[i];
  }
  return ReadPartition(std::move(ranges), std::move(bases));
}

ReadPartition partition_reads(std::span<const Read> reads, int ranks) {
  std::vector<std::uint64_t> lengths;
  lengths.reserve(reads.size());
  for (const auto& r : reads) lengths.push_back(r.length());
  return partition_reads(lengths, ranks);
}

}  // namespace olap
