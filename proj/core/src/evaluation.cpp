#include "forge/evaluation.hpp"

#include <map>

#include "forge/error.hpp"
#include "json_util.hpp"

namespace forge {

EvaluationReport summarize_evaluation(const std::vector<ScoreRecord>& records) {
  EvaluationReport rep;
  rep.responses = records.size();
  rep.metrics = summarize_records(records);
  std::vector<double> hl, cp;
  std::map<std::string, int> ids;
  for (const auto& r : records) {
    const auto& fact = r.response.report.fact;
    hl.push_back(fact.hallucination);
    if (fact.comprehensiveness) cp.push_back(*fact.comprehensiveness);
    ids[r.response.instance_id] = 1;
  }
  rep.questions = ids.size();
  rep.hallucination = summarize(hl);
  rep.comprehensiveness = summarize(cp);
  // Mean of the scaled sums divided by the number of metrics per category.
  rep.table.wc_mean = rep.metrics.wc.mean / 3.0;
  rep.table.ss_mean = rep.metrics.ss.mean / 2.0;
  rep.table.fact_diff = rep.metrics.fact.mean;
  return rep;
}

EvaluationReport evaluate_model(const std::string& endpoint, const Dataset& test,
                                const RunConfig& config) {
  Dataset usable{test.name, usable_instances({test})};
  if (usable.instances.empty()) {
    throw Error(ErrorKind::kEmptyInput, "test split '" + test.name + "' has no usable questions");
  }
  auto client = make_inference_client(config.resolve_endpoint(endpoint), config.retry);
  const SampleOutcome sampled = sample_instances(usable.instances, config.effective_sampling(),
                                                 *client, {config.model, config.max_in_flight});
  std::vector<ScoreJob> jobs;
  std::vector<ScoreRecord> records;
  for (const auto& set : sampled.sets) {
    const Instance* inst = usable.find(set.instance_id);
    for (const auto& r : set.responses) {
      jobs.push_back({inst, r.text});
      records.push_back({inst->question, r.temperature, {set.instance_id, r.index, r.text, {}}});
    }
  }
  const auto clients = ScoringClients::from_urls(config.endpoints.similarity,
                                                 config.endpoints.entailment, config.retry);
  const auto reports = score_batch(jobs, clients, config.weights, config.max_in_flight);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].response.report = reports[i];

  EvaluationReport rep = summarize_evaluation(records);
  rep.endpoint = endpoint;
  rep.test_name = test.name;
  rep.questions = usable.instances.size();
  rep.rejected = sampled.rejected;
  return rep;
}

std::string EvaluationReport::to_json() const {
  const auto ms = [](const MeanStd& m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
  Json j;
  j["endpoint"] = endpoint;
  j["test"] = test_name;
  j["questions"] = questions;
  j["responses"] = responses;
  j["rejected"] = rejected.size();
  j["words_composition"] = ms(metrics.wc);
  j["semantic_similarity"] = ms(metrics.ss);
  j["factuality"] = ms(metrics.fact);
  j["total"] = ms(metrics.total);
  j["hallucination"] = ms(hallucination);
  j["comprehensiveness"] = ms(comprehensiveness);
  j["table"] = {{"words_composition", table.wc_mean},
                {"semantic_similarity", table.ss_mean},
                {"factuality", table.fact_diff}};
  return j.dump(2);
}

}  // namespace forge
