#include <algorithm>

#include "forge/error.hpp"
#include "forge/scoring.hpp"

namespace forge {
namespace {

double percent_of(const std::vector<EntailmentLabel>& labels, EntailmentLabel wanted) {
  const auto hits = std::count(labels.begin(), labels.end(), wanted);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace

double hallucination_score(const std::vector<EntailmentLabel>& all_statements) {
  if (all_statements.empty()) {
    throw Error(ErrorKind::kEmptyStatementSet, "hallucination needs at least one statement");
  }
  return percent_of(all_statements, EntailmentLabel::kContradiction);
}

double comprehensiveness_score(const std::vector<EntailmentLabel>& must_have) {
  if (must_have.empty()) {
    throw Error(ErrorKind::kEmptyMustHave, "comprehensiveness needs must-have statements");
  }
  return percent_of(must_have, EntailmentLabel::kEntailment);
}

}  // namespace forge
