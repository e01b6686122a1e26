#include <doctest.h>

#include <random>
#include <sstream>

#include "olap/seq_io.hpp"

using namespace olap;

TEST_CASE("parse_fastq reads one well-formed record") {
  auto reads = parse_fastq("@r0\nACGT\n+\nIIII\n");
  REQUIRE(reads.size() == 1);
  CHECK(reads[0].rid == 0);
  CHECK(reads[0].bases == "ACGT");
  CHECK(reads[0].name == "r0");
  CHECK(reads[0].length() == 4);
}

TEST_CASE("parse_fastq uppercases bases and numbers records in order") {
  auto reads = parse_fastq("@r0\nacgt\n+\nIIII\n@r1\nTT\n+\nII\n");
  REQUIRE(reads.size() == 2);
  CHECK(reads[0].bases == "ACGT");
  CHECK(reads[1].bases == "TT");
  CHECK(reads[1].rid == 1);
}

TEST_CASE("parse_fastq errors name the failing record") {
  auto record_of = [](std::string_view text) -> long {
    try {
      parse_fastq(text);
    } catch (const ParseError& e) {
      return static_cast<long>(e.record());
    }
    return -1;
  };
  CHECK(record_of("@r0\nACGT\n+\nIII\n") == 0);
  CHECK(record_of("@r0\nACGT\n+\nIIII\nr1\nAC\n+\nII\n") == 1);
  CHECK(record_of("@r0\nACGT\n+\nIIII\n@r1\nAC\n") == 1);
  CHECK(record_of("@r0\nACGT\nIIII\n") == 0);
}

TEST_CASE("parse_fastq accepts CRLF, N bases and empty reads") {
  auto reads = parse_fastq("@a\r\nACNT\r\n+\r\n!!!!\r\n@b\n\n+\n\n");
  REQUIRE(reads.size() == 2);
  CHECK(reads[0].bases == "ACNT");
  CHECK(reads[1].length() == 0);
}

TEST_CASE("round trip through write_fastq preserves rids and bases") {
  std::mt19937_64 rng(11);
  std::vector<Read> reads;
  for (int i = 0; i < 50; ++i) {
    Read r;
    r.rid = i;
    r.name = "x" + std::to_string(i);
    const auto len = rng() % 200;
    for (std::size_t j = 0; j < len; ++j) r.bases.push_back("ACGTN"[rng() % 5]);
    reads.push_back(r);
  }
  std::ostringstream out;
  write_fastq(out, reads);
  auto back = parse_fastq(out.str());
  REQUIRE(back.size() == reads.size());
  for (std::size_t i = 0; i < reads.size(); ++i) {
    CHECK(back[i].rid == reads[i].rid);
    CHECK(back[i].bases == reads[i].bases);
  }
}

TEST_CASE("partition_reads examples") {
  const std::vector<std::uint64_t> even{10, 10, 10, 10};
  auto p = partition_reads(even, 2);
  CHECK(p.range(0) == RidRange{0, 2});
  CHECK(p.range(1) == RidRange{2, 4});

  const std::vector<std::uint64_t> skewed{30, 10, 10, 10};
  p = partition_reads(skewed, 2);
  CHECK(p.range(0) == RidRange{0, 1});
  CHECK(p.range(1) == RidRange{1, 4});
  CHECK(p.bases(0) == 30);
  CHECK(p.bases(1) == 30);

  p = partition_reads(skewed, 1);
  CHECK(p.range(0) == RidRange{0, 4});

  CHECK_THROWS_AS(partition_reads(skewed, 0), std::invalid_argument);
}

TEST_CASE("partition_reads with more ranks than reads leaves some empty") {
  const std::vector<std::uint64_t> lengths{5, 5};
  auto p = partition_reads(lengths, 5);
  ReadId covered = 0;
  for (int r = 0; r < 5; ++r) covered += p.range(r).size();
  CHECK(covered == 2);
  CHECK(p.owner(0) != p.owner(1));
}

TEST_CASE("partition invariants over random inputs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng() % 60;
    const int ranks = 1 + static_cast<int>(rng() % 12);
    std::vector<std::uint64_t> lengths(n);
    std::uint64_t total = 0, longest = 0;
    for (auto& l : lengths) {
      l = rng() % 500;
      total += l;
      longest = std::max(longest, l);
    }
    auto p = partition_reads(lengths, ranks);
    REQUIRE(p.ranks() == ranks);
    ReadId next = 0;
    for (int r = 0; r < ranks; ++r) {
      CHECK(p.range(r).begin == next);
      next = p.range(r).end;
      const auto bound = (total + ranks - 1) / ranks + longest;
      CHECK(p.bases(r) <= bound);
    }
    CHECK(next == n);
    for (ReadId rid = 0; rid < n; ++rid) CHECK(p.range(p.owner(rid)).contains(rid));
    CHECK(partition_reads(lengths, ranks).ranges() == p.ranges());
  }
}
