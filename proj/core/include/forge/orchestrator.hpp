#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/records.hpp"
#include "forge/run_config.hpp"

namespace forge {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

// Population mean and standard deviation; zeros for an empty input.
MeanStd summarize(const std::vector<double>& values);
double median(std::vector<double> values);

struct StepCounts {
  std::size_t questions = 0;
  std::size_t sampled = 0;
  std::size_t responses = 0;
  std::size_t pairs = 0;
  std::size_t sft_examples = 0;
  std::size_t skipped = 0;
};

struct MetricSummary {
  MeanStd wc;
  MeanStd ss;
  MeanStd fact;
  MeanStd total;
  double median_total = 0.0;
};

MetricSummary summarize_records(const std::vector<ScoreRecord>& records);

struct StepManifest {
  int step_index = 0;
  std::string kind;  // "sft" or "dpo"
  std::string model_endpoint;
  std::string reference_endpoint;
  StepCounts counts;
  MetricSummary metrics;
  std::map<std::string, std::string> digests;  // export file name -> sha256
  std::vector<RejectedQuestion> skipped;
  std::string config_json;

  std::string to_json() const;
  static StepManifest from_json(std::string_view text);
};

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// What is on disk in a run directory:
//   run.json, steps/<n>/manifest.json, steps/<n>/{samples,scores,sft,dpo}.jsonl,
//   steps/<n>/handoff.json (trained model registered after step n).
struct RunState {
  std::filesystem::path run_dir;
  RunConfig config;
  std::vector<StepManifest> manifests;        // step order
  std::map<int, std::string> registrations;   // step -> endpoint trained on its exports

  int next_step() const { return static_cast<int>(manifests.size()); }
  std::filesystem::path step_dir(int step) const;
  // Model that samples step `step`. Throws Error(kAwaitingTrainer).
  std::string endpoint_for_step(int step) const;
  std::vector<double> median_history() const;
};

// Creates run_dir and writes run.json. An existing run.json is kept, so
// re-initialising resumes.
RunState init_run(const std::filesystem::path& run_dir, const RunConfig& config);
RunState open_run(const std::filesystem::path& run_dir);

struct StepArtifacts {
  StepManifest manifest;
  std::filesystem::path dir;
  std::string manifest_digest;
};

// sample -> score -> (step 0: SFT labels | step >= 1: preference pairs) ->
// exports -> manifest. Work happens in steps/<n>.partial and is renamed into
// place only after the manifest is written; on any error the partial
// directory is removed and state is left untouched.
StepArtifacts run_step(RunState& state);

// Records that a model trained on step `step`'s exports is served at
// endpoint. Throws Error(kUnknownStep) or Error(kDuplicateRegistration).
void register_trained_model(RunState& state, int step, const std::string& endpoint);

enum class ConvergenceDecision { kContinue, kConverged, kMaxStepsReached };
std::string_view to_string(ConvergenceDecision d);

// Converged when there are >= 2 entries and the last improvement is below
// epsilon; otherwise max_steps_reached once history.size() >= max_steps.
ConvergenceDecision check_convergence(const std::vector<double>& history, double epsilon,
                                      int max_steps);

struct LoopResult {
  std::vector<StepArtifacts> steps;
  ConvergenceDecision decision = ConvergenceDecision::kContinue;
  bool awaiting_trainer = false;
};

// Runs steps until convergence, max_steps, or a missing trainer handoff.
// With mock_trainer each step's own endpoint is registered for the next one.
LoopResult run_loop(RunState& state, bool mock_trainer);

// Re-hashes every export named in the manifests. Returns mismatching paths.
std::vector<std::string> verify_manifests(const RunState& state);

}  // namespace forge
