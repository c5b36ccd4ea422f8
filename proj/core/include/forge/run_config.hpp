#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/generation.hpp"
#include "forge/http_client.hpp"
#include "forge/preference.hpp"
#include "forge/scoring.hpp"

namespace forge {

struct DatasetRef {
  std::string name;
  std::string path;  // as written; resolved against RunConfig::base_dir
};

struct Endpoints {
  std::string inference;
  std::string similarity;
  std::string entailment;
  std::string reference;
};

// Passed through to the external trainer, never used here.
struct TrainerMetadata {
  double lr_initial = 5e-7;
  double warmup_ratio = 0.1;
  double lr_later = 1e-7;
  double beta = 0.01;
};

struct RunConfig {
  CompositeWeights weights;
  double threshold = 200.0;
  SamplingPolicy sampling;
  PairingStrategy pairing = PairingStrategy::kCrossProduct;
  bool fallback_best_vs_worst = false;
  std::vector<DatasetRef> datasets;
  std::string test_name;
  Endpoints endpoints;
  std::string model = "policy";
  int max_steps = 3;
  double convergence_epsilon = 2.0;
  TrainerMetadata trainer;
  std::int64_t seed = 0;
  std::size_t max_in_flight = 8;
  RetryPolicy retry;
  bool mock_trainer = false;

  // Directory relative dataset and stub paths are resolved against.
  std::filesystem::path base_dir;

  void validate() const;
  // Fills empty endpoints from FORGE_INFER_URL, FORGE_SIM_URL and
  // FORGE_ENTAIL_URL; scorers fall back to "mock".
  void apply_environment();

  std::filesystem::path resolve(const std::string& path) const;
  // Endpoint with a relative "stub:" path resolved against base_dir.
  std::string resolve_endpoint(const std::string& endpoint) const;

  PairingOptions pairing_options() const {
    return {threshold, pairing, fallback_best_vs_worst};
  }
  // Policy actually sent to the endpoint (seed taken from the run seed).
  SamplingPolicy effective_sampling() const;

  std::string to_json() const;
  static RunConfig from_json(std::string_view text, std::filesystem::path base_dir);
  static RunConfig load(const std::filesystem::path& path);
};

// Loads every dataset, strict. Throws SchemaError / Error(kIo).
std::vector<Dataset> load_datasets(const RunConfig& config);

}  // namespace forge
