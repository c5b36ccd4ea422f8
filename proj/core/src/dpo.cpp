#include "forge/dpo.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "json_util.hpp"

namespace forge {

void DpoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorKind::kInvalidArgument, "beta must be a positive finite number");
  }
}

SequenceLogprob SequenceLogprob::from_tokens(const std::optional<std::vector<double>>& tokens) {
  if (!tokens) throw Error(ErrorKind::kMissingLogprobs, "endpoint returned no token_logprobs");
  SequenceLogprob s;
  s.token_logprobs = *tokens;
  for (double lp : s.token_logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorKind::kInvalidArgument, "token log-probabilities must be finite and <= 0");
    }
  }
  s.sum = std::accumulate(s.token_logprobs.begin(), s.token_logprobs.end(), 0.0);
  return s;
}

double SequenceLogprob::mean() const {
  return token_logprobs.empty() ? 0.0 : sum / static_cast<double>(token_logprobs.size());
}

double implicit_reward(const SequenceLogprob& policy, const SequenceLogprob& reference,
                       const DpoConfig& cfg) {
  return cfg.beta * (policy.sum - reference.sum);
}

double dpo_loss_from_margin(double margin) {
  // softplus(-m) = max(-m, 0) + log1p(exp(-|m|))
  return std::max(-margin, 0.0) + std::log1p(std::exp(-std::fabs(margin)));
}

double dpo_loss(double reward_chosen, double reward_rejected) {
  return dpo_loss_from_margin(reward_chosen - reward_rejected);
}

DpoLossReport batch_dpo_report(const std::vector<PairLogprobs>& pairs, const DpoConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorKind::kEmptyInput, "no pairs for the DPO report");
  DpoLossReport report;
  std::size_t wins = 0;
  double loss_sum = 0.0;
  for (const auto& p : pairs) {
    PairLoss row;
    row.pair_id = p.pair_id;
    row.reward_chosen = implicit_reward(p.policy_chosen, p.reference_chosen, cfg);
    row.reward_rejected = implicit_reward(p.policy_rejected, p.reference_rejected, cfg);
    row.margin = row.reward_chosen - row.reward_rejected;
    row.loss = dpo_loss_from_margin(row.margin);
    row.reward_chosen_per_token = cfg.beta * (p.policy_chosen.mean() - p.reference_chosen.mean());
    row.reward_rejected_per_token =
        cfg.beta * (p.policy_rejected.mean() - p.reference_rejected.mean());
    wins += row.margin > 0.0 ? 1 : 0;
    loss_sum += row.loss;
    report.pairs.push_back(std::move(row));
  }
  const auto n = static_cast<double>(pairs.size());
  report.mean_loss = loss_sum / n;
  report.preference_accuracy = static_cast<double>(wins) / n;
  return report;
}

std::string DpoLossReport::to_json() const {
  Json j;
  j["mean_loss"] = mean_loss;
  j["preference_accuracy"] = preference_accuracy;
  j["length_normalized"] = false;
  j["pairs"] = Json::array();
  for (const auto& p : pairs) {
    Json row;
    row["pair_id"] = p.pair_id;
    row["reward_chosen"] = p.reward_chosen;
    row["reward_rejected"] = p.reward_rejected;
    row["margin"] = p.margin;
    row["loss"] = p.loss;
    row["reward_chosen_per_token"] = p.reward_chosen_per_token;
    row["reward_rejected_per_token"] = p.reward_rejected_per_token;
    j["pairs"].push_back(std::move(row));
  }
  return j.dump(2);
}

SequenceLogprob fetch_sequence_logprob(InferenceClient& client, const std::string& model,
                                       std::string_view question, std::string_view response) {
  CompletionRequest req;
  req.model = model;
  req.prompt = std::string(question) + "\n" + std::string(response);
  req.temperature = 0.0;
  req.max_tokens = 0;
  req.logprobs = true;
  req.echo = true;
  return SequenceLogprob::from_tokens(client.complete(req).token_logprobs);
}

DpoLossReport dpo_report_for_pairs(const std::vector<PreferencePair>& pairs,
                                   InferenceClient& policy, InferenceClient& reference,
                                   const DpoConfig& cfg, std::size_t max_in_flight) {
  std::vector<PairLogprobs> rows(pairs.size());
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    rows[i].pair_id = pairs[i].instance_id + "#" + std::to_string(seen[pairs[i].instance_id]++);
  }
  parallel_for(pairs.size() * 4, max_in_flight, [&](std::size_t job) {
    const auto& p = pairs[job / 4];
    auto& row = rows[job / 4];
    try {
      switch (job % 4) {
        case 0: row.policy_chosen = fetch_sequence_logprob(policy, "policy", p.question, p.chosen.text); break;
        case 1: row.reference_chosen = fetch_sequence_logprob(reference, "reference", p.question, p.chosen.text); break;
        case 2: row.policy_rejected = fetch_sequence_logprob(policy, "policy", p.question, p.rejected.text); break;
        default: row.reference_rejected = fetch_sequence_logprob(reference, "reference", p.question, p.rejected.text); break;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "pair " + row.pair_id + ": " + e.what());
    }
  });
  return batch_dpo_report(rows, cfg);
}

}  // namespace forge
