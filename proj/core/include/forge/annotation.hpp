#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "forge/dataset.hpp"

namespace forge {

enum class CriterionCode { kMC, kRC, kKR, kR, kIRC, kOII, kPDB, kPHE, kPHL };

// Positive criteria favour the chosen side; negative ones favour the other.
enum class Polarity { kPositiveWhenSelected, kNegativeWhenSelected };

struct Criterion {
  CriterionCode code;
  std::string_view abbrev;
  std::string_view name;
  std::string_view definition;
  Polarity polarity;
};

inline constexpr std::size_t kCriterionCount = 9;

const std::array<Criterion, kCriterionCount>& criteria();
const Criterion& criterion(CriterionCode code);
// Throws Error(kInvalidArgument) for unknown abbreviations.
CriterionCode parse_criterion(std::string_view abbrev);

enum class Side { kA, kB };
std::string_view to_string(Side side);
Side parse_side(std::string_view s);  // "A" | "B"
inline Side other(Side s) { return s == Side::kA ? Side::kB : Side::kA; }

struct ComparisonTask {
  std::string task_id;
  std::string question;
  std::string side_a;
  std::string side_b;
  // Blinding, server side only.
  std::string source_a;
  std::string source_b;

  const std::string& source_of(Side s) const { return s == Side::kA ? source_a : source_b; }

  std::string to_json_line() const;  // includes blinding
  static ComparisonTask from_json_line(std::string_view line);
  // Payload for annotators: no source labels.
  std::string blinded_json() const;
};

struct AnswerSource {
  std::string label;                           // e.g. "model", "expert"
  std::map<std::string, std::string> answers;  // instance id -> answer text
};

struct TaskRejection {
  std::string instance_id;
  std::string reason;
};

struct TaskCreation {
  std::vector<ComparisonTask> tasks;
  std::vector<TaskRejection> rejected;
};

// One task per instance, sides shuffled by a generator seeded with seed.
// Throws Error(kMissingAnswer) when either source lacks an instance.
// Instances whose two answers are identical (or empty) are rejected.
TaskCreation create_tasks(const std::vector<Instance>& instances, const AnswerSource& a,
                          const AnswerSource& b, std::uint64_t seed);

struct AnnotationRecord {
  std::string task_id;
  std::string annotator_id;
  std::map<CriterionCode, Side> choices;
  std::string timestamp;

  std::string to_json_line() const;
  static AnnotationRecord from_json_line(std::string_view line);
};

struct CriterionOutcome {
  int votes_a = 0;
  int votes_b = 0;
  bool agreed = false;
  std::optional<Side> majority;
  std::string better_source;  // empty when there is no majority
};

struct TaskAgreement {
  std::string task_id;
  std::map<CriterionCode, CriterionOutcome> outcomes;
};

struct CriterionSummary {
  std::size_t agreed = 0;
  std::size_t complete = 0;
  double agreement_rate = 0.0;
  std::map<std::string, std::size_t> better_counts;  // source -> tasks judged better
};

struct AgreementReport {
  std::vector<TaskAgreement> tasks;  // complete tasks, task order
  std::vector<std::string> incomplete;
  std::map<CriterionCode, CriterionSummary> summary;

  std::string to_json() const;
};

struct AgreementOptions {
  int annotators_per_task = 3;
  int min_agree = 2;
};

// Tasks with exactly annotators_per_task distinct annotators are complete;
// others are listed as incomplete and left out of the rates.
AgreementReport compute_agreement(const std::vector<ComparisonTask>& tasks,
                                  const std::vector<AnnotationRecord>& records,
                                  const AgreementOptions& options = {});

std::vector<ComparisonTask> load_tasks(const std::filesystem::path& path);
void save_tasks(const std::vector<ComparisonTask>& tasks, const std::filesystem::path& path);
std::vector<AnnotationRecord> load_records(const std::filesystem::path& path);

// Task queue and append-only record log behind the HTTP surface.
// Thread-safe; all submissions go through one writer.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<ComparisonTask> tasks, std::filesystem::path records_path,
                  AgreementOptions options = {}, std::size_t snapshot_every = 10);

  // The annotator's pending task, or the first task they have not answered
  // that still needs annotators. Empty when nothing is left.
  std::optional<ComparisonTask> next_task(const std::string& annotator_id);

  // Validates and appends. Throws Error(kUnknownTask),
  // Error(kIncompleteChoices) or Error(kDuplicateSubmission).
  void submit(AnnotationRecord record);

  AgreementReport report() const;
  std::vector<AnnotationRecord> records() const;
  const std::filesystem::path& records_path() const { return records_path_; }

 private:
  void write_snapshot_locked() const;

  mutable std::mutex mu_;
  std::vector<ComparisonTask> tasks_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path records_path_;
  AgreementOptions options_;
  std::size_t snapshot_every_;
  std::vector<AnnotationRecord> records_;
  std::set<std::pair<std::string, std::string>> answered_;  // (task, annotator)
  std::map<std::string, std::size_t> per_task_;
  std::map<std::string, std::string> pending_;  // annotator -> task
};

struct AnnotationServerOptions {
  std::string bearer_token;  // empty disables the check
};

// GET  /api/tasks/next?annotator=<id>
// POST /api/tasks/{id}/annotations   {annotator, choices: {MC: "A", ...}}
// GET  /api/report
class AnnotationServer {
 public:
  AnnotationServer(std::shared_ptr<AnnotationStore> store, AnnotationServerOptions options = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen_blocking(const std::string& host, int port);
  void stop();
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace forge
