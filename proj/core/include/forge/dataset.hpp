#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace forge {

enum class StatementKind { kMustHave, kNiceToHave };

struct Statement {
  std::string text;
  StatementKind kind = StatementKind::kMustHave;

  bool operator==(const Statement&) const = default;
};

// One long-form QA item with its decomposed statements.
struct Instance {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<Statement> must_have;
  std::vector<Statement> nice_to_have;
  bool ambiguous = false;
  std::string source;

  std::size_t statement_count() const {
    return must_have.size() + nice_to_have.size();
  }
  // MH followed by NH, the order verdicts are reported in.
  std::vector<Statement> all_statements() const;

  bool operator==(const Instance&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<Instance> instances;

  const Instance* find(std::string_view id) const;
};

struct DatasetStats {
  std::size_t n_instances = 0;
  std::size_t n_ambiguous = 0;
  // Over non-ambiguous instances; empty when there are none.
  std::optional<double> avg_answer_words;
  std::optional<double> avg_mh;
  std::optional<double> avg_nh;
};

struct SchemaIssue {
  std::size_t line = 0;
  std::string field;
  std::string detail;
};

struct LoadResult {
  Dataset dataset;
  std::vector<SchemaIssue> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
  // Throws SchemaError for the first collected issue.
  void throw_if_errors() const;
};

// Reads a JSONL dataset. Valid lines are kept in order; malformed ones are
// reported in LoadResult::errors. Throws Error(kIo) if the file is missing.
LoadResult load_dataset(const std::filesystem::path& path, std::string name);

// Same as load_dataset but throws SchemaError on the first malformed line.
Dataset load_dataset_strict(const std::filesystem::path& path, std::string name);

// Parses one JSONL line. Throws SchemaError carrying line_number.
Instance parse_instance(std::string_view line, std::size_t line_number);

// Canonical single-line JSON: fields id, question, answer, must_have,
// nice_to_have, ambiguous, source in that order.
std::string serialize_instance(const Instance& instance);
std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Converts loosely keyed raw QA files (JSON array or JSONL, K-QA style keys
// accepted) into validated instances. Missing ids become "<name>-<n>".
LoadResult ingest_raw(const std::filesystem::path& path, std::string name);

struct Split {
  std::vector<Dataset> train;
  Dataset test;
};

Split leave_one_out_split(const std::vector<Dataset>& datasets,
                          std::string_view test_name);

// Non-ambiguous instances of every dataset, in order.
std::vector<Instance> usable_instances(const std::vector<Dataset>& datasets);

DatasetStats dataset_statistics(const Dataset& dataset);

}  // namespace forge
