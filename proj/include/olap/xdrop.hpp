#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace olap {

struct ScoringScheme {
  int match = 1;
  int mismatch = -1;
  int gap = -1;
  int x_drop = 7;

  void validate() const;
  int substitution(char a, char b) const { return (a == b && a != 'N') ? match : mismatch; }
};

// Best-scoring extension of a seed in one direction.
struct Extension {
  int score = 0;
  std::uint32_t len_s = 0;  // characters of s consumed
  std::uint32_t len_t = 0;
  std::string ops;          // outward from the seed, when requested
};

// Antidiagonal x-drop extension from the start of both strings: cells more
// than X below the best score of earlier antidiagonals are pruned, and the
// search stops once a whole antidiagonal is pruned. Among cells tying the
// best score, the one with the longest t prefix wins, then the longest s.
// Transcript ops: M match, X mismatch, I consumes s only, D consumes t only.
Extension xdrop_extend_forward(std::string_view s, std::string_view t, const ScoringScheme& scoring,
                               bool with_transcript);

// Seed-anchored alignment of s and t around a shared k-window.
struct SeedAlignment {
  int score = 0;
  std::uint32_t begin_s = 0, end_s = 0;  // half-open
  std::uint32_t begin_t = 0, end_t = 0;
  std::string transcript;  // left to right over the extents, if requested
};

// Extends left from the seed start and right from the seed end, both
// independently. Throws ContractViolation when the windows differ or run
// past either string.
SeedAlignment xdrop_extend(std::string_view s, std::string_view t, std::uint32_t pos_s, std::uint32_t pos_t, int k,
                           const ScoringScheme& scoring, bool with_transcript = false);

struct ValidationResult {
  bool ok = true;
  std::string problem;
};

// Checks the gapped rows implied by an alignment: equal row lengths, no
// column gapped in both rows, and removing gaps recovers the aligned
// substrings of s and t.
ValidationResult check_gapped_rows(std::string_view row_s, std::string_view row_t, std::string_view s_segment,
                                   std::string_view t_segment);

// Expands the transcript into gapped rows, applies check_gapped_rows, and
// checks that the transcript's own score equals the reported score and that
// each M/X op agrees with the characters it covers.
ValidationResult validate_alignment(const SeedAlignment& alignment, std::string_view s, std::string_view t,
                                    const ScoringScheme& scoring);

}  // namespace olap
