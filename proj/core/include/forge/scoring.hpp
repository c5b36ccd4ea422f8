#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/dataset.hpp"
#include "forge/http_client.hpp"
#include "forge/rouge.hpp"

namespace forge {

enum class EntailmentLabel { kEntailment, kNeutral, kContradiction };

std::string_view to_string(EntailmentLabel label);
// Accepts "entailment" | "neutral" | "contradiction"; throws Error(kProtocol).
EntailmentLabel parse_entailment_label(std::string_view text);

// bl is BLEURT-like (unbounded below), bs BERTScore-like F in [0, 1].
struct SimilarityScores {
  double bl = 0.0;
  double bs = 0.0;
};

// Percentages. comprehensiveness is empty when the instance has no
// must-have statements.
struct FactualityScores {
  double hallucination = 0.0;
  std::optional<double> comprehensiveness;
};

struct CompositeWeights {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;

  // Throws Error(kInvalidArgument) on negative or non-finite weights.
  void validate() const;
};

// The three scaled category terms and their weighted sum.
struct CompositeTerms {
  double wc_scaled = 0.0;   // 100 (r1.f + r2.f + rl.f), in [0, 300]
  double ss_scaled = 0.0;   // 100 (bl + bs), not clamped
  double fact_term = 0.0;   // CP - HL, or -HL when CP is undefined
  double total = 0.0;
};

struct StatementVerdict {
  StatementKind kind = StatementKind::kMustHave;
  std::size_t index = 0;  // position within its own list
  EntailmentLabel label = EntailmentLabel::kNeutral;
};

struct ScoreReport {
  RougeScores rouge;
  SimilarityScores sim;
  FactualityScores fact;
  CompositeTerms terms;
  std::vector<StatementVerdict> verdicts;  // MH in order, then NH
  std::vector<std::string> flags;

  double total() const { return terms.total; }
};

// Verdict lists are per statement. Throws Error(kEmptyStatementSet) when
// verdicts is empty.
double hallucination_score(const std::vector<EntailmentLabel>& all_statements);
// Throws Error(kEmptyMustHave) when verdicts is empty.
double comprehensiveness_score(const std::vector<EntailmentLabel>& must_have);

CompositeTerms composite_score(const RougeScores& rouge, const SimilarityScores& sim,
                               const FactualityScores& fact, const CompositeWeights& w);

// Recombines already scaled terms under new weights.
CompositeTerms reweight(const CompositeTerms& terms, const CompositeWeights& w);

// Presentation used by the results tables: category means in percent.
struct TableSummary {
  double wc_mean = 0.0;
  double ss_mean = 0.0;
  double fact_diff = 0.0;
};

// rouge and sim as fractions; fact in percent.
TableSummary aggregate_report(const RougeScores& rouge, const SimilarityScores& sim,
                              const FactualityScores& fact);

class EntailmentClient {
 public:
  virtual ~EntailmentClient() = default;
  // premise is the model response, hypothesis one statement.
  virtual EntailmentLabel classify(std::string_view premise, std::string_view hypothesis) = 0;
};

class SimilarityClient {
 public:
  virtual ~SimilarityClient() = default;
  virtual SimilarityScores score(std::string_view candidate, std::string_view reference) = 0;
};

// Hypothesis tokens all in the premise: entailment. Hypothesis carrying a
// negation token (not/no/never) whose other tokens are all in the premise:
// contradiction. Otherwise neutral.
class MockEntailmentClient final : public EntailmentClient {
 public:
  EntailmentLabel classify(std::string_view premise, std::string_view hypothesis) override;
};

// Token-set Jaccard for both bl and bs.
class MockSimilarityClient final : public SimilarityClient {
 public:
  SimilarityScores score(std::string_view candidate, std::string_view reference) override;
};

// POST {premise, hypothesis} to <base>/v1/entail.
class HttpEntailmentClient final : public EntailmentClient {
 public:
  HttpEntailmentClient(std::string base_url, RetryPolicy retry);
  EntailmentLabel classify(std::string_view premise, std::string_view hypothesis) override;

 private:
  HttpJsonClient http_;
};

// POST {candidate, reference} to <base>/v1/similarity.
class HttpSimilarityClient final : public SimilarityClient {
 public:
  HttpSimilarityClient(std::string base_url, RetryPolicy retry);
  SimilarityScores score(std::string_view candidate, std::string_view reference) override;

 private:
  HttpJsonClient http_;
};

struct ScoringClients {
  std::shared_ptr<SimilarityClient> similarity;
  std::shared_ptr<EntailmentClient> entailment;

  static ScoringClients mock();
  // "mock" selects the in-tree mock, anything else is an HTTP base URL.
  static ScoringClients from_urls(const std::string& similarity_url,
                                  const std::string& entailment_url, RetryPolicy retry);
};

// Validates inputs then asks the client. Transport failures surface as
// Error(kClient).
EntailmentLabel entail(std::string_view premise, std::string_view hypothesis,
                       EntailmentClient& client);

// Full scoring of one response against one non-ambiguous instance.
ScoreReport score_response(const Instance& instance, std::string_view response,
                           const ScoringClients& clients, const CompositeWeights& w);

struct ScoreJob {
  const Instance* instance = nullptr;
  std::string response;
};

// Scores jobs with at most max_in_flight concurrent calls; output order
// matches input order.
std::vector<ScoreReport> score_batch(const std::vector<ScoreJob>& jobs,
                                     const ScoringClients& clients,
                                     const CompositeWeights& w, std::size_t max_in_flight);

}  // namespace forge
