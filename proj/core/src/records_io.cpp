#include <map>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/records.hpp"
#include "json_util.hpp"

namespace forge {
namespace {

Json prf_json(const PrfScore& s) {
  Json j;
  j["p"] = s.precision;
  j["r"] = s.recall;
  j["f"] = s.f;
  return j;
}

PrfScore prf_from(const Json& j) {
  return {j.at("p").get<double>(), j.at("r").get<double>(), j.at("f").get<double>()};
}

StatementKind kind_from(const std::string& s) {
  if (s == "must_have") return StatementKind::kMustHave;
  if (s == "nice_to_have") return StatementKind::kNiceToHave;
  throw Error(ErrorKind::kProtocol, "unknown statement kind '" + s + "'");
}

}  // namespace

std::string to_json_line(const ScoreRecord& record) {
  const auto& r = record.response;
  const auto& rep = r.report;
  Json j;
  j["id"] = r.instance_id;
  j["slot"] = r.slot;
  j["temperature"] = record.temperature;
  j["question"] = record.question;
  j["text"] = r.text;
  j["rouge"] = {{"r1", prf_json(rep.rouge.r1)}, {"r2", prf_json(rep.rouge.r2)},
                {"rl", prf_json(rep.rouge.rl)}};
  j["bl"] = rep.sim.bl;
  j["bs"] = rep.sim.bs;
  j["hl"] = rep.fact.hallucination;
  j["cp"] = json_from_optional(rep.fact.comprehensiveness);
  j["wc_scaled"] = rep.terms.wc_scaled;
  j["ss_scaled"] = rep.terms.ss_scaled;
  j["fact_term"] = rep.terms.fact_term;
  j["total"] = rep.terms.total;
  Json verdicts = Json::array();
  for (const auto& v : rep.verdicts) {
    verdicts.push_back({{"kind", v.kind == StatementKind::kMustHave ? "must_have" : "nice_to_have"},
                        {"index", v.index},
                        {"label", std::string(to_string(v.label))}});
  }
  j["verdicts"] = std::move(verdicts);
  j["flags"] = rep.flags;
  return j.dump();
}

ScoreRecord score_record_from_json_line(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    ScoreRecord rec;
    rec.question = j.value("question", "");
    rec.temperature = j.value("temperature", 0.0);
    auto& r = rec.response;
    r.instance_id = j.at("id").get<std::string>();
    r.slot = j.at("slot").get<int>();
    r.text = j.at("text").get<std::string>();
    auto& rep = r.report;
    const Json& rouge = j.at("rouge");
    rep.rouge = {prf_from(rouge.at("r1")), prf_from(rouge.at("r2")), prf_from(rouge.at("rl"))};
    rep.sim = {j.at("bl").get<double>(), j.at("bs").get<double>()};
    rep.fact.hallucination = j.at("hl").get<double>();
    rep.fact.comprehensiveness = json_optional_double(j, "cp");
    rep.terms.wc_scaled = j.at("wc_scaled").get<double>();
    rep.terms.ss_scaled = j.at("ss_scaled").get<double>();
    rep.terms.fact_term = j.at("fact_term").get<double>();
    rep.terms.total = j.at("total").get<double>();
    for (const auto& v : j.value("verdicts", Json::array())) {
      rep.verdicts.push_back({kind_from(v.at("kind").get<std::string>()),
                              v.at("index").get<std::size_t>(),
                              parse_entailment_label(v.at("label").get<std::string>())});
    }
    rep.flags = j.value("flags", std::vector<std::string>{});
    return rec;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed score record: ") + e.what());
  }
}

std::string write_score_records(const std::vector<ScoreRecord>& records,
                                const std::filesystem::path& path) {
  std::string bytes;
  for (const auto& r : records) {
    bytes += to_json_line(r);
    bytes += '\n';
  }
  write_file_atomic(path, bytes);
  return sha256_hex(bytes);
}

std::vector<ScoreRecord> load_score_records(const std::filesystem::path& path) {
  std::vector<ScoreRecord> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (!line.empty()) out.push_back(score_record_from_json_line(line));
  }
  return out;
}

std::string write_sampled_sets(const std::vector<SampledSet>& sets,
                               const std::filesystem::path& path) {
  std::string bytes;
  for (const auto& s : sets) {
    bytes += s.to_json_line();
    bytes += '\n';
  }
  write_file_atomic(path, bytes);
  return sha256_hex(bytes);
}

std::vector<SampledSet> load_sampled_sets(const std::filesystem::path& path) {
  std::vector<SampledSet> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (!line.empty()) out.push_back(SampledSet::from_json_line(line));
  }
  return out;
}

std::vector<std::vector<ScoreRecord>> group_by_instance(const std::vector<ScoreRecord>& records) {
  std::map<std::string, std::vector<ScoreRecord>> grouped;
  for (const auto& r : records) grouped[r.response.instance_id].push_back(r);
  std::vector<std::vector<ScoreRecord>> out;
  out.reserve(grouped.size());
  for (auto& [id, group] : grouped) out.push_back(std::move(group));
  return out;
}

}  // namespace forge
