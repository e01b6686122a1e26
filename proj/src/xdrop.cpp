#include "olap/xdrop.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "olap/exchange.hpp"

namespace olap {

void ScoringScheme::validate() const {
  if (match <= 0) throw std::invalid_argument("match reward must be positive");
  if (mismatch > 0) throw std::invalid_argument("mismatch penalty must be <= 0");
  if (gap > 0) throw std::invalid_argument("gap penalty must be <= 0");
  if (x_drop < 0) throw std::invalid_argument("x-drop must be non-negative");
}

namespace {

constexpr int kPruned = std::numeric_limits<int>::min() / 4;

// Cells of one antidiagonal d = i + j, indexed by i in [lo, lo + size).
struct Antidiagonal {
  std::int64_t lo = 0;
  std::vector<int> score;

  int at(std::int64_t i) const {
    const auto off = i - lo;
    return (off < 0 || off >= static_cast<std::int64_t>(score.size())) ? kPruned : score[off];
  }
};

}  // namespace

Extension xdrop_extend_forward(std::string_view s, std::string_view t, const ScoringScheme& scoring,
                               bool with_transcript) {
  const std::int64_t n = s.size(), m = t.size();
  const int x = scoring.x_drop;

  std::vector<Antidiagonal> kept;  // every antidiagonal, for traceback
  Antidiagonal prev2, prev1{0, {0}}, cur;
  if (with_transcript) kept.push_back(prev1);

  int best = 0;
  std::int64_t best_i = 0, best_j = 0;

  for (std::int64_t d = 1; d <= n + m; ++d) {
    // Reachable cells: gap moves from antidiagonal d-1, diagonal moves from d-2.
    std::int64_t lo = prev1.lo;
    std::int64_t hi = prev1.lo + static_cast<std::int64_t>(prev1.score.size());
    if (!prev2.score.empty()) {
      lo = std::min(lo, prev2.lo + 1);
      hi = std::max(hi, prev2.lo + static_cast<std::int64_t>(prev2.score.size()));
    }
    lo = std::max(lo, d - m);
    hi = std::min({hi, n, d});
    const std::int64_t i_lo = std::max<std::int64_t>(lo, 0);
    if (hi < i_lo) break;

    cur.lo = i_lo;
    cur.score.assign(hi - i_lo + 1, kPruned);
    const int floor = best - x;
    for (std::int64_t i = i_lo; i <= hi; ++i) {
      const std::int64_t j = d - i;
      int v = kPruned;
      if (i >= 1 && j >= 1) {
        const int diag = prev2.at(i - 1);
        if (diag != kPruned) v = std::max(v, diag + scoring.substitution(s[i - 1], t[j - 1]));
      }
      if (i >= 1) {
        const int up = prev1.at(i - 1);
        if (up != kPruned) v = std::max(v, up + scoring.gap);
      }
      if (j >= 1) {
        const int left = prev1.at(i);
        if (left != kPruned) v = std::max(v, left + scoring.gap);
      }
      if (v != kPruned && v >= floor) cur.score[i - i_lo] = v;
    }

    // Trim pruned cells from both ends.
    std::size_t first = 0, last = cur.score.size();
    while (first < last && cur.score[first] == kPruned) ++first;
    while (last > first && cur.score[last - 1] == kPruned) --last;
    if (first == last) break;
    cur.score = std::vector<int>(cur.score.begin() + first, cur.score.begin() + last);
    cur.lo += static_cast<std::int64_t>(first);

    for (std::size_t off = 0; off < cur.score.size(); ++off) {
      const int v = cur.score[off];
      if (v == kPruned) continue;
      const std::int64_t i = cur.lo + static_cast<std::int64_t>(off);
      const std::int64_t j = d - i;
      if (v > best || (v == best && (j > best_j || (j == best_j && i > best_i)))) {
        best = v;
        best_i = i;
        best_j = j;
      }
    }

    if (with_transcript) kept.push_back(cur);
    prev2 = std::move(prev1);
    prev1 = std::move(cur);
    cur = Antidiagonal{};
  }

  Extension ext;
  ext.score = best;
  ext.len_s = static_cast<std::uint32_t>(best_i);
  ext.len_t = static_cast<std::uint32_t>(best_j);
  if (!with_transcript) return ext;

  std::int64_t i = best_i, j = best_j;
  while (i + j > 0) {
    const auto d = i + j;
    const int v = kept[d].at(i);
    if (i >= 1 && j >= 1 && d >= 2) {
      const int diag = kept[d - 2].at(i - 1);
      const int sub = scoring.substitution(s[i - 1], t[j - 1]);
      if (diag != kPruned && diag + sub == v) {
        ext.ops.push_back(sub == scoring.match && s[i - 1] == t[j - 1] && s[i - 1] != 'N' ? 'M' : 'X');
        --i;
        --j;
        continue;
      }
    }
    if (i >= 1) {
      const int up = kept[d - 1].at(i - 1);
      if (up != kPruned && up + scoring.gap == v) {
        ext.ops.push_back('I');
        --i;
        continue;
      }
    }
    ext.ops.push_back('D');
    --j;
  }
  std::reverse(ext.ops.begin(), ext.ops.end());
  return ext;
}

SeedAlignment xdrop_extend(std::string_view s, std::string_view t, std::uint32_t pos_s, std::uint32_t pos_t, int k,
                           const ScoringScheme& scoring, bool with_transcript) {
  if (k <= 0) throw ContractViolation("seed length must be positive");
  if (static_cast<std::size_t>(pos_s) + k > s.size() || static_cast<std::size_t>(pos_t) + k > t.size())
    throw ContractViolation("seed window runs past the end of a read");
  if (s.substr(pos_s, k) != t.substr(pos_t, k)) throw ContractViolation("seed windows differ");

  const std::string left_s(s.rbegin() + static_cast<std::ptrdiff_t>(s.size() - pos_s), s.rend());
  const std::string left_t(t.rbegin() + static_cast<std::ptrdiff_t>(t.size() - pos_t), t.rend());
  const auto left = xdrop_extend_forward(left_s, left_t, scoring, with_transcript);
  const auto right = xdrop_extend_forward(s.substr(pos_s + k), t.substr(pos_t + k), scoring, with_transcript);

  SeedAlignment a;
  a.score = k * scoring.match + left.score + right.score;
  a.begin_s = pos_s - left.len_s;
  a.end_s = pos_s + k + right.len_s;
  a.begin_t = pos_t - left.len_t;
  a.end_t = pos_t + k + right.len_t;
  if (with_transcript) {
    a.transcript.assign(left.ops.rbegin(), left.ops.rend());
    a.transcript.append(static_cast<std::size_t>(k), 'M');
    a.transcript += right.ops;
  }
  return a;
}

ValidationResult check_gapped_rows(std::string_view row_s, std::string_view row_t, std::string_view s_segment,
                                   std::string_view t_segment) {
  if (row_s.size() != row_t.size()) return {false, "gapped rows differ in length"};
  std::string s_back, t_back;
  for (std::size_t c = 0; c < row_s.size(); ++c) {
    if (row_s[c] == '-' && row_t[c] == '-') return {false, "column " + std::to_string(c) + " is a gap in both rows"};
    if (row_s[c] != '-') s_back.push_back(row_s[c]);
    if (row_t[c] != '-') t_back.push_back(row_t[c]);
  }
  if (s_back != s_segment) return {false, "removing gaps from the first row does not recover s"};
  if (t_back != t_segment) return {false, "removing gaps from the second row does not recover t"};
  return {};
}

ValidationResult validate_alignment(const SeedAlignment& a, std::string_view s, std::string_view t,
                                    const ScoringScheme& scoring) {
  if (a.begin_s > a.end_s || a.end_s > s.size() || a.begin_t > a.end_t || a.end_t > t.size())
    return {false, "extents fall outside the reads"};
  const auto seg_s = s.substr(a.begin_s, a.end_s - a.begin_s);
  const auto seg_t = t.substr(a.begin_t, a.end_t - a.begin_t);

  std::string row_s, row_t;
  std::size_t is = 0, it = 0;
  long score = 0;
  for (char op : a.transcript) {
    switch (op) {
      case 'M':
      case 'X': {
        if (is >= seg_s.size() || it >= seg_t.size()) return {false, "transcript overruns an extent"};
        const char cs = seg_s[is++], ct = seg_t[it++];
        const bool same = cs == ct && cs != 'N';
        if ((op == 'M') != same) return {false, std::string("op '") + op + "' disagrees with the aligned bases"};
        row_s.push_back(cs);
        row_t.push_back(ct);
        score += same ? scoring.match : scoring.mismatch;
        break;
      }
      case 'I':
        if (is >= seg_s.size()) return {false, "transcript overruns an extent"};
        row_s.push_back(seg_s[is++]);
        row_t.push_back('-');
        score += scoring.gap;
        break;
      case 'D':
        if (it >= seg_t.size()) return {false, "transcript overruns an extent"};
        row_s.push_back('-');
        row_t.push_back(seg_t[it++]);
        score += scoring.gap;
        break;
      default:
        return {false, std::string("unknown transcript op '") + op + "'"};
    }
  }
  if (auto rows = check_gapped_rows(row_s, row_t, seg_s, seg_t); !rows.ok) return rows;
  if (score != a.score)
    return {false, "transcript scores " + std::to_string(score) + " but alignment reports " + std::to_string(a.score)};
  return {};
}

}  // namespace olap
