#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "forge/scoring.hpp"

namespace forge {

struct ScoredResponse {
  std::string instance_id;
  int slot = 0;
  std::string text;
  ScoreReport report;

  double total() const { return report.total(); }
};

struct RankedAnswer {
  std::string text;
  double total = 0.0;
};

struct PreferencePair {
  std::string instance_id;
  std::string question;
  RankedAnswer chosen;
  RankedAnswer rejected;
};

struct SftExample {
  std::string instance_id;
  std::string question;
  std::string label;
  double total = 0.0;
};

enum class PairingStrategy { kCrossProduct, kBestVsWorst, kBestVsAll };

std::string_view to_string(PairingStrategy strategy);
// Throws Error(kInvalidArgument) for unknown names.
PairingStrategy parse_pairing_strategy(std::string_view name);

// Descending by total; ties by text then slot. Throws Error(kEmptyInput).
std::vector<ScoredResponse> rank_responses(std::vector<ScoredResponse> scored);

struct Partition {
  std::vector<ScoredResponse> preferred;     // total >= threshold
  std::vector<ScoredResponse> dispreferred;  // total <  threshold
};

// Input order is preserved inside each side.
Partition split_by_threshold(const std::vector<ScoredResponse>& sorted, double threshold);

// Pairs from a partition; empty when either side is empty. Pairs whose two
// texts are identical, or whose totals do not strictly decrease, are dropped.
std::vector<PreferencePair> build_pairs(const std::vector<ScoredResponse>& preferred,
                                        const std::vector<ScoredResponse>& dispreferred,
                                        PairingStrategy strategy,
                                        std::string_view question = {});

// First element of a ranked list. Throws Error(kEmptyInput).
SftExample select_sft_label(const std::vector<ScoredResponse>& sorted,
                            std::string_view question = {});

struct PairingOptions {
  double threshold = 200.0;
  PairingStrategy strategy = PairingStrategy::kCrossProduct;
  // When the threshold leaves one side empty, pair best against worst anyway.
  bool fallback_best_vs_worst = false;
};

struct InstancePairing {
  std::vector<PreferencePair> pairs;
  std::size_t n_preferred = 0;
  std::size_t n_dispreferred = 0;
  std::string skip_reason;  // empty unless the instance yields no pairs
};

// rank -> split -> build_pairs for one instance's k responses.
InstancePairing pair_instance(const std::vector<ScoredResponse>& responses,
                              std::string_view question, const PairingOptions& options);

// JSONL writers. Each writes `path` plus `path.sha256` holding the lowercase
// hex digest of the file bytes, and returns that digest. Rows are sorted by
// instance id (stable). Throws Error(kIo).
std::string export_sft(std::vector<SftExample> examples, const std::filesystem::path& path);
std::string export_dpo(std::vector<PreferencePair> pairs, const std::filesystem::path& path);

std::vector<PreferencePair> load_dpo(const std::filesystem::path& path);

}  // namespace forge
