#pragma once

#include <cstddef>

#include "forge/text.hpp"

namespace forge {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;

  bool operator==(const PrfScore&) const = default;
};

struct RougeScores {
  PrfScore r1;
  PrfScore r2;
  PrfScore rl;

  double f_sum() const { return r1.f + r2.f + rl.f; }
};

// Harmonic mean, 0 when p + r == 0.
double f_measure(double precision, double recall);

// Clipped n-gram overlap. All zeros when either side has no n-grams.
// Throws Error(kInvalidArgument) for n == 0.
PrfScore rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n);

// Length of the longest common subsequence over whole token sequences.
std::size_t lcs_length(const Tokens& a, const Tokens& b);

PrfScore rouge_l(const Tokens& candidate, const Tokens& reference);

// ROUGE-1, ROUGE-2 and ROUGE-L of candidate against reference text.
RougeScores rouge_scores(const Tokens& candidate, const Tokens& reference);

}  // namespace forge
