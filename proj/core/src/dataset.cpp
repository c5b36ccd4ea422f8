#include "forge/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/text.hpp"
#include "json_util.hpp"

namespace forge {

std::vector<std::string> split_lines(const std::string& contents) {
  std::vector<std::string> lines;
  std::istringstream in(contents);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Statement> Instance::all_statements() const {
  std::vector<Statement> all = must_have;
  all.insert(all.end(), nice_to_have.begin(), nice_to_have.end());
  return all;
}

const Instance* Dataset::find(std::string_view id) const {
  for (const auto& inst : instances) {
    if (inst.id == id) return &inst;
  }
  return nullptr;
}

void LoadResult::throw_if_errors() const {
  if (errors.empty()) return;
  const auto& first = errors.front();
  throw SchemaError(first.line, first.field, first.detail);
}

namespace {

const Json& require(const Json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw SchemaError(line, field, "missing field");
  return *it;
}

std::string require_string(const Json& obj, const char* field, std::size_t line) {
  const Json& v = require(obj, field, line);
  if (!v.is_string()) throw SchemaError(line, field, "expected string");
  return v.get<std::string>();
}

std::vector<Statement> parse_statements(const Json& obj, const char* field,
                                        StatementKind kind, std::size_t line) {
  const Json& v = require(obj, field, line);
  if (!v.is_array()) throw SchemaError(line, field, "expected array of strings");
  std::vector<Statement> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string name = std::string(field) + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) throw SchemaError(line, name, "expected string");
    Statement s{v[i].get<std::string>(), kind};
    if (tokenize(s.text).empty()) throw SchemaError(line, name, "statement has no tokens");
    out.push_back(std::move(s));
  }
  return out;
}

void validate(const Instance& inst, std::size_t line) {
  if (inst.id.empty()) throw SchemaError(line, "id", "empty id");
  if (trim(inst.question).empty()) throw SchemaError(line, "question", "empty question");
  if (inst.ambiguous) return;
  if (trim(inst.answer).empty()) {
    throw SchemaError(line, "answer", "empty answer on a non-ambiguous instance");
  }
  if (inst.must_have.empty()) {
    throw SchemaError(line, "must_have",
                      "non-ambiguous instance needs at least one statement");
  }
}

Instance instance_from_json(const Json& obj, std::size_t line,
                            const std::string& default_source) {
  if (!obj.is_object()) throw SchemaError(line, "<line>", "expected a JSON object");
  Instance inst;
  inst.id = require_string(obj, "id", line);
  inst.question = require_string(obj, "question", line);
  inst.answer = require_string(obj, "answer", line);
  inst.must_have = parse_statements(obj, "must_have", StatementKind::kMustHave, line);
  inst.nice_to_have =
      parse_statements(obj, "nice_to_have", StatementKind::kNiceToHave, line);
  if (auto it = obj.find("ambiguous"); it != obj.end()) {
    if (!it->is_boolean()) throw SchemaError(line, "ambiguous", "expected boolean");
    inst.ambiguous = it->get<bool>();
  }
  inst.source = default_source;
  if (auto it = obj.find("source"); it != obj.end()) {
    if (!it->is_string()) throw SchemaError(line, "source", "expected string");
    inst.source = it->get<std::string>();
  }
  validate(inst, line);
  return inst;
}

Json parse_json_line(std::string_view line, std::size_t line_number) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw SchemaError(line_number, "<json>", e.what());
  }
}

void check_unique_id(std::set<std::string>& seen, const Instance& inst,
                     std::size_t line) {
  if (!seen.insert(inst.id).second) {
    throw SchemaError(line, "id", "duplicate id '" + inst.id + "'");
  }
}

}  // namespace

Instance parse_instance(std::string_view line, std::size_t line_number) {
  return instance_from_json(parse_json_line(line, line_number), line_number, "");
}

LoadResult load_dataset(const std::filesystem::path& path, std::string name) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kIo, "dataset file not found: " + path.string());
  }
  LoadResult result;
  result.dataset.name = std::move(name);
  std::set<std::string> seen;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t line_number = i + 1;
    try {
      Instance inst = instance_from_json(parse_json_line(lines[i], line_number),
                                         line_number, result.dataset.name);
      check_unique_id(seen, inst, line_number);
      result.dataset.instances.push_back(std::move(inst));
    } catch (const SchemaError& e) {
      result.errors.push_back({e.line(), e.field(), e.what()});
    }
  }
  if (result.dataset.instances.empty() && result.errors.empty()) {
    result.warnings.push_back("dataset " + path.string() + " contains no instances");
    spdlog::warn("dataset {} contains no instances", path.string());
  }
  return result;
}

Dataset load_dataset_strict(const std::filesystem::path& path, std::string name) {
  LoadResult result = load_dataset(path, std::move(name));
  result.throw_if_errors();
  return std::move(result.dataset);
}

namespace {

Json statements_json(const std::vector<Statement>& statements) {
  Json arr = Json::array();
  for (const auto& s : statements) arr.push_back(s.text);
  return arr;
}

}  // namespace

std::string serialize_instance(const Instance& inst) {
  Json j;
  j["id"] = inst.id;
  j["question"] = inst.question;
  j["answer"] = inst.answer;
  j["must_have"] = statements_json(inst.must_have);
  j["nice_to_have"] = statements_json(inst.nice_to_have);
  j["ambiguous"] = inst.ambiguous;
  j["source"] = inst.source;
  return j.dump();
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset.instances) {
    out += serialize_instance(inst);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

namespace {

const Json* first_key(const Json& obj, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = obj.find(key);
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

Json statements_from_raw(const Json* value) {
  Json arr = Json::array();
  if (value == nullptr) return arr;
  if (value->is_string()) {
    for (auto& s : split_sentences(value->get<std::string>())) arr.push_back(s);
    return arr;
  }
  return *value;
}

Json normalize_raw(const Json& raw, const std::string& name, std::size_t index) {
  if (!raw.is_object()) return raw;
  Json j;
  const Json* id = first_key(raw, {"id", "ID", "qid"});
  if (id == nullptr) {
    j["id"] = name + "-" + std::to_string(index);
  } else {
    j["id"] = id->is_string() ? id->get<std::string>() : id->dump();
  }
  if (const Json* q = first_key(raw, {"question", "Question"})) j["question"] = *q;
  const Json* a = first_key(raw, {"answer", "Answer", "Free_form_answer", "long_answer"});
  j["answer"] = a ? *a : Json("");
  j["must_have"] = statements_from_raw(first_key(raw, {"must_have", "Must_have", "MH"}));
  j["nice_to_have"] =
      statements_from_raw(first_key(raw, {"nice_to_have", "Nice_to_have", "NH"}));
  if (const Json* amb = first_key(raw, {"ambiguous"})) {
    j["ambiguous"] = *amb;
  } else {
    const bool empty_answer = !j["answer"].is_string() ||
                              trim(j["answer"].get<std::string>()).empty();
    j["ambiguous"] = empty_answer || j["must_have"].empty();
  }
  j["source"] = name;
  if (const Json* src = first_key(raw, {"source"})) j["source"] = *src;
  return j;
}

}  // namespace

LoadResult ingest_raw(const std::filesystem::path& path, std::string name) {
  const std::string contents = read_file(path);
  LoadResult result;
  result.dataset.name = name;

  std::vector<std::pair<std::size_t, Json>> records;
  const std::string head = trim(contents.substr(0, std::min<std::size_t>(contents.size(), 64)));
  if (!head.empty() && head.front() == '[') {
    Json arr;
    try {
      arr = Json::parse(contents);
    } catch (const Json::parse_error& e) {
      throw SchemaError(1, "<json>", e.what());
    }
    for (std::size_t i = 0; i < arr.size(); ++i) records.emplace_back(i + 1, arr[i]);
  } else {
    const auto lines = split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      try {
        records.emplace_back(i + 1, parse_json_line(lines[i], i + 1));
      } catch (const SchemaError& e) {
        result.errors.push_back({e.line(), e.field(), e.what()});
      }
    }
  }

  std::set<std::string> seen;
  for (auto& [line, raw] : records) {
    try {
      Instance inst =
          instance_from_json(normalize_raw(raw, name, line), line, name);
      check_unique_id(seen, inst, line);
      result.dataset.instances.push_back(std::move(inst));
    } catch (const SchemaError& e) {
      result.errors.push_back({e.line(), e.field(), e.what()});
    }
  }
  if (result.dataset.instances.empty()) {
    result.warnings.push_back("no instances ingested from " + path.string());
  }
  return result;
}

Split leave_one_out_split(const std::vector<Dataset>& datasets,
                          std::string_view test_name) {
  if (datasets.size() < 2) {
    throw Error(ErrorKind::kDegenerateSplit,
                "leave-one-out needs at least two datasets, got " +
                    std::to_string(datasets.size()));
  }
  const auto matches = std::count_if(datasets.begin(), datasets.end(),
                                     [&](const Dataset& d) { return d.name == test_name; });
  if (matches != 1) {
    throw Error(ErrorKind::kUnknownDataset,
                "test dataset '" + std::string(test_name) + "' matched " +
                    std::to_string(matches) + " datasets");
  }
  Split split;
  for (const auto& d : datasets) {
    if (d.name == test_name) {
      split.test = d;
    } else {
      split.train.push_back(d);
    }
  }
  return split;
}

std::vector<Instance> usable_instances(const std::vector<Dataset>& datasets) {
  std::vector<Instance> out;
  for (const auto& d : datasets) {
    for (const auto& inst : d.instances) {
      if (!inst.ambiguous) out.push_back(inst);
    }
  }
  return out;
}

DatasetStats dataset_statistics(const Dataset& dataset) {
  DatasetStats stats;
  stats.n_instances = dataset.instances.size();
  double words = 0;
  double mh = 0;
  double nh = 0;
  std::size_t usable = 0;
  for (const auto& inst : dataset.instances) {
    if (inst.ambiguous) {
      ++stats.n_ambiguous;
      continue;
    }
    ++usable;
    words += static_cast<double>(count_words(inst.answer));
    mh += static_cast<double>(inst.must_have.size());
    nh += static_cast<double>(inst.nice_to_have.size());
  }
  if (usable > 0) {
    const auto n = static_cast<double>(usable);
    stats.avg_answer_words = words / n;
    stats.avg_mh = mh / n;
    stats.avg_nh = nh / n;
  }
  return stats;
}

}  // namespace forge
