#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/generation.hpp"
#include "forge/preference.hpp"

namespace forge {

struct DpoConfig {
  double beta = 0.01;
  void validate() const;
};

struct SequenceLogprob {
  std::vector<double> token_logprobs;  // each <= 0
  double sum = 0.0;

  // Throws Error(kMissingLogprobs) for an absent list and
  // Error(kInvalidArgument) for positive or non-finite entries.
  static SequenceLogprob from_tokens(const std::optional<std::vector<double>>& tokens);
  double mean() const;
};

// beta * (policy.sum - reference.sum).
double implicit_reward(const SequenceLogprob& policy, const SequenceLogprob& reference,
                       const DpoConfig& cfg);

// -log(sigmoid(margin)), stable for |margin| far beyond 1e4.
double dpo_loss_from_margin(double margin);
double dpo_loss(double reward_chosen, double reward_rejected);

struct PairLogprobs {
  std::string pair_id;
  SequenceLogprob policy_chosen;
  SequenceLogprob reference_chosen;
  SequenceLogprob policy_rejected;
  SequenceLogprob reference_rejected;
};

struct PairLoss {
  std::string pair_id;
  double reward_chosen = 0.0;
  double reward_rejected = 0.0;
  double margin = 0.0;
  double loss = 0.0;
  // Diagnostics only: beta * per-token-mean difference.
  double reward_chosen_per_token = 0.0;
  double reward_rejected_per_token = 0.0;
};

struct DpoLossReport {
  std::vector<PairLoss> pairs;
  double mean_loss = 0.0;
  double preference_accuracy = 0.0;  // fraction with margin > 0

  std::string to_json() const;
};

// Throws Error(kEmptyInput) for no pairs.
DpoLossReport batch_dpo_report(const std::vector<PairLogprobs>& pairs, const DpoConfig& cfg);

// Scores question + "\n" + response on an endpoint in echo mode. Throws
// Error(kMissingLogprobs) when the endpoint returns none.
SequenceLogprob fetch_sequence_logprob(InferenceClient& client, const std::string& model,
                                       std::string_view question, std::string_view response);

// Fetches all four sequences for every pair and builds a report. Pair ids
// are "<instance id>#<n>". MissingLogprobs errors name the pair.
DpoLossReport dpo_report_for_pairs(const std::vector<PreferencePair>& pairs,
                                   InferenceClient& policy, InferenceClient& reference,
                                   const DpoConfig& cfg, std::size_t max_in_flight = 8);

}  // namespace forge
