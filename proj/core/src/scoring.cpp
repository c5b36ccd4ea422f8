#include <spdlog/spdlog.h>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/scoring.hpp"
#include "forge/text.hpp"

namespace forge {

EntailmentLabel entail(std::string_view premise, std::string_view hypothesis,
                       EntailmentClient& client) {
  if (trim(premise).empty() || trim(hypothesis).empty()) {
    throw Error(ErrorKind::kInvalidArgument, "entailment needs non-empty premise and hypothesis");
  }
  return client.classify(premise, hypothesis);
}

ScoreReport score_response(const Instance& instance, std::string_view response,
                           const ScoringClients& clients, const CompositeWeights& w) {
  if (instance.ambiguous) {
    throw Error(ErrorKind::kInvalidArgument,
                "instance " + instance.id + " is ambiguous and cannot be scored");
  }
  if (instance.statement_count() == 0) {
    throw Error(ErrorKind::kEmptyStatementSet, "instance " + instance.id + " has no statements");
  }
  ScoreReport report;
  report.rouge = rouge_scores(tokenize(response), tokenize(instance.answer));

  const bool empty_response = trim(response).empty();
  if (empty_response) {
    report.flags.push_back("empty_response");
  } else {
    report.sim = clients.similarity->score(response, instance.answer);
  }

  std::vector<EntailmentLabel> mh_labels;
  std::vector<EntailmentLabel> all_labels;
  const auto judge = [&](const std::vector<Statement>& list, StatementKind kind,
                         std::size_t offset) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      EntailmentLabel label = EntailmentLabel::kNeutral;
      if (!empty_response) {
        try {
          label = entail(response, list[i].text, *clients.entailment);
        } catch (const Error& e) {
          throw Error(e.kind(), "instance " + instance.id + ", statement " +
                                    std::to_string(offset + i) + ": " + e.what());
        }
      }
      report.verdicts.push_back({kind, i, label});
      all_labels.push_back(label);
      if (kind == StatementKind::kMustHave) mh_labels.push_back(label);
    }
  };
  judge(instance.must_have, StatementKind::kMustHave, 0);
  judge(instance.nice_to_have, StatementKind::kNiceToHave, instance.must_have.size());

  report.fact.hallucination = hallucination_score(all_labels);
  if (mh_labels.empty()) {
    report.flags.push_back("empty_must_have");
  } else {
    report.fact.comprehensiveness = comprehensiveness_score(mh_labels);
  }
  report.terms = composite_score(report.rouge, report.sim, report.fact, w);
  return report;
}

std::vector<ScoreReport> score_batch(const std::vector<ScoreJob>& jobs,
                                     const ScoringClients& clients,
                                     const CompositeWeights& w, std::size_t max_in_flight) {
  std::vector<ScoreReport> reports(jobs.size());
  parallel_for(jobs.size(), max_in_flight, [&](std::size_t i) {
    reports[i] = score_response(*jobs[i].instance, jobs[i].response, clients, w);
  });
  return reports;
}

}  // namespace forge
