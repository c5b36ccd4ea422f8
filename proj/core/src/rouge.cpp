#include "forge/rouge.hpp"

#include <algorithm>
#include <map>
#include <string_view>
#include <vector>

#include "forge/error.hpp"

namespace forge {
namespace {

using NGramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NGramCounts count_ngrams(const Tokens& tokens, std::size_t n, std::size_t& total) {
  NGramCounts counts;
  total = 0;
  if (tokens.size() < n) return counts;
  std::vector<std::string_view> key(n);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) key[j] = tokens[i + j];
    ++counts[key];
    ++total;
  }
  return counts;
}

PrfScore from_overlap(double overlap, std::size_t cand_total, std::size_t ref_total) {
  if (cand_total == 0 || ref_total == 0) return {};
  PrfScore s;
  s.precision = overlap / static_cast<double>(cand_total);
  s.recall = overlap / static_cast<double>(ref_total);
  s.f = f_measure(s.precision, s.recall);
  return s;
}

}  // namespace

double f_measure(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

PrfScore rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kInvalidArgument, "rouge_n requires n >= 1");
  std::size_t cand_total = 0;
  std::size_t ref_total = 0;
  const NGramCounts cand = count_ngrams(candidate, n, cand_total);
  const NGramCounts ref = count_ngrams(reference, n, ref_total);

  // Both maps are ordered by key: merge-join and clip by the smaller count.
  std::size_t overlap = 0;
  auto c = cand.begin();
  auto r = ref.begin();
  while (c != cand.end() && r != ref.end()) {
    if (c->first < r->first) {
      ++c;
    } else if (r->first < c->first) {
      ++r;
    } else {
      overlap += std::min(c->second, r->second);
      ++c;
      ++r;
    }
  }
  return from_overlap(static_cast<double>(overlap), cand_total, ref_total);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  // Two rolling rows over b.
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrfScore rouge_l(const Tokens& candidate, const Tokens& reference) {
  return from_overlap(static_cast<double>(lcs_length(candidate, reference)),
                      candidate.size(), reference.size());
}

RougeScores rouge_scores(const Tokens& candidate, const Tokens& reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2),
          rouge_l(candidate, reference)};
}

}  // namespace forge
