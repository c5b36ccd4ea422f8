#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "forge/generation.hpp"
#include "forge/preference.hpp"

namespace forge {

// One line of scores.jsonl: a scored response plus the question it answers.
struct ScoreRecord {
  std::string question;
  double temperature = 0.0;
  ScoredResponse response;
};

std::string to_json_line(const ScoreRecord& record);
ScoreRecord score_record_from_json_line(std::string_view line);

std::string write_score_records(const std::vector<ScoreRecord>& records,
                                const std::filesystem::path& path);
std::vector<ScoreRecord> load_score_records(const std::filesystem::path& path);

std::string write_sampled_sets(const std::vector<SampledSet>& sets,
                               const std::filesystem::path& path);
std::vector<SampledSet> load_sampled_sets(const std::filesystem::path& path);

// Groups records by instance id, ids ascending, slots in file order.
std::vector<std::vector<ScoreRecord>> group_by_instance(const std::vector<ScoreRecord>& records);

}  // namespace forge
