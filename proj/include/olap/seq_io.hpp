#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace olap {

using ReadId = std::uint64_t;

struct Read {
  ReadId rid = 0;
  std::string name;   // header without '@'; labels output only
  std::string bases;  // uppercased, over {A,C,G,T,N,...}

  std::size_t length() const { return bases.size(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t record, const std::string& what);
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

// Parses 4-line FASTQ records. Read ids start at `first_rid` and follow
// record order; errors name the zero-based record index within the stream.
std::vector<Read> parse_fastq(std::istream& in, ReadId first_rid = 0);
std::vector<Read> parse_fastq(std::string_view text, ReadId first_rid = 0);

// Reads every path in order; rids are dense across the concatenation.
std::vector<Read> load_fastq_files(std::span<const std::string> paths);

// Writes reads as FASTQ with a constant synthetic quality string.
void write_fastq(std::ostream& out, std::span<const Read> reads);

struct RidRange {
  ReadId begin = 0;
  ReadId end = 0;  // exclusive

  ReadId size() const { return end - begin; }
  bool contains(ReadId rid) const { return rid >= begin && rid < end; }
  bool operator==(const RidRange&) const = default;
};

// Contiguous rid ranges, one per rank, balanced by base count.
class ReadPartition {
 public:
  ReadPartition() = default;
  ReadPartition(std::vector<RidRange> ranges, std::vector<std::uint64_t> bases);

  int ranks() const { return static_cast<int>(ranges_.size()); }
  ReadId total_reads() const { return ranges_.empty() ? 0 : ranges_.back().end; }
  const RidRange& range(int rank) const { return ranges_.at(rank); }
  std::uint64_t bases(int rank) const { return bases_.at(rank); }
  const std::vector<RidRange>& ranges() const { return ranges_; }

  // Rank whose range holds `rid`; throws std::out_of_range otherwise.
  int owner(ReadId rid) const;

 private:
  std::vector<RidRange> ranges_;
  std::vector<std::uint64_t> bases_;
};

// Greedy prefix-sum split: rank r ends at the first read whose running base
// total reaches (r+1)/P of the whole. P must be positive.
ReadPartition partition_reads(std::span<const std::uint64_t> lengths, int ranks);
ReadPartition partition_reads(std::span<const Read> reads, int ranks);

}  // namespace olap
