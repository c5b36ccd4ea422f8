#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "forge/orchestrator.hpp"

namespace forge {

struct EvaluationReport {
  std::string endpoint;
  std::string test_name;
  std::size_t questions = 0;
  std::size_t responses = 0;
  std::vector<RejectedQuestion> rejected;
  MetricSummary metrics;       // scaled terms, across samples and questions
  TableSummary table;          // category means in percent
  MeanStd hallucination;
  MeanStd comprehensiveness;   // over responses with defined CP

  std::string to_json() const;
};

// Table-convention view and per-metric statistics of already scored records.
EvaluationReport summarize_evaluation(const std::vector<ScoreRecord>& records);

// Samples k responses per test question from endpoint and scores them all.
// Throws Error(kEmptyInput) for an empty test split.
EvaluationReport evaluate_model(const std::string& endpoint, const Dataset& test,
                                const RunConfig& config);

}  // namespace forge
