#include <cmath>

#include "forge/error.hpp"
#include "forge/scoring.hpp"

namespace forge {

void CompositeWeights::validate() const {
  for (double a : {alpha1, alpha2, alpha3}) {
    if (!std::isfinite(a) || a < 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "composite weights must be finite and >= 0");
    }
  }
}

CompositeTerms reweight(const CompositeTerms& terms, const CompositeWeights& w) {
  CompositeTerms out = terms;
  out.total = w.alpha1 * terms.wc_scaled + w.alpha2 * terms.ss_scaled +
              w.alpha3 * terms.fact_term;
  return out;
}

CompositeTerms composite_score(const RougeScores& rouge, const SimilarityScores& sim,
                               const FactualityScores& fact, const CompositeWeights& w) {
  CompositeTerms terms;
  terms.wc_scaled = 100.0 * rouge.f_sum();
  terms.ss_scaled = 100.0 * (sim.bl + sim.bs);
  terms.fact_term = fact.comprehensiveness.value_or(0.0) - fact.hallucination;
  return reweight(terms, w);
}

TableSummary aggregate_report(const RougeScores& rouge, const SimilarityScores& sim,
                              const FactualityScores& fact) {
  TableSummary s;
  s.wc_mean = 100.0 * rouge.f_sum() / 3.0;
  s.ss_mean = 100.0 * (sim.bl + sim.bs) / 2.0;
  s.fact_diff = fact.comprehensiveness.value_or(0.0) - fact.hallucination;
  return s;
}

}  // namespace forge
