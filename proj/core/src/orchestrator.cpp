#include "forge/orchestrator.hpp"

#include <fcntl.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "json_util.hpp"

namespace forge {

namespace fs = std::filesystem;

MeanStd summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

MetricSummary summarize_records(const std::vector<ScoreRecord>& records) {
  std::vector<double> wc, ss, fact, total;
  for (const auto& r : records) {
    const auto& t = r.response.report.terms;
    wc.push_back(t.wc_scaled);
    ss.push_back(t.ss_scaled);
    fact.push_back(t.fact_term);
    total.push_back(t.total);
  }
  MetricSummary m;
  m.wc = summarize(wc);
  m.ss = summarize(ss);
  m.fact = summarize(fact);
  m.total = summarize(total);
  m.median_total = median(total);
  return m;
}

namespace {

constexpr const char* kConvergenceRule =
    "artifact choice: stop when the median composite improves by less than "
    "convergence_epsilon between consecutive steps, or after max_steps steps";

Json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }
MeanStd mean_std_from(const Json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

std::string StepManifest::to_json() const {
  Json j;
  j["step_index"] = step_index;
  j["kind"] = kind;
  j["model_endpoint"] = model_endpoint;
  j["reference_endpoint"] = reference_endpoint;
  j["counts"] = {{"questions", counts.questions}, {"sampled", counts.sampled},
                 {"responses", counts.responses}, {"pairs", counts.pairs},
                 {"sft_examples", counts.sft_examples}, {"skipped", counts.skipped}};
  j["metrics"] = {{"wc", mean_std_json(metrics.wc)}, {"ss", mean_std_json(metrics.ss)},
                  {"fact", mean_std_json(metrics.fact)}, {"total", mean_std_json(metrics.total)},
                  {"median_total", metrics.median_total}};
  Json digest_json = Json::object();
  for (const auto& [name, digest] : digests) digest_json[name] = digest;
  j["exports"] = digest_json;
  Json skipped_json = Json::array();
  for (const auto& s : skipped) skipped_json.push_back({{"id", s.instance_id}, {"reason", s.reason}});
  j["skipped"] = skipped_json;
  j["convergence_rule"] = kConvergenceRule;
  j["config"] = config_json.empty() ? Json::object() : Json::parse(config_json);
  return j.dump(2) + "\n";
}

StepManifest StepManifest::from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    StepManifest m;
    m.step_index = j.at("step_index").get<int>();
    m.kind = j.at("kind").get<std::string>();
    m.model_endpoint = j.value("model_endpoint", "");
    m.reference_endpoint = j.value("reference_endpoint", "");
    const Json& c = j.at("counts");
    m.counts = {c.at("questions").get<std::size_t>(), c.at("sampled").get<std::size_t>(),
                c.at("responses").get<std::size_t>(), c.at("pairs").get<std::size_t>(),
                c.at("sft_examples").get<std::size_t>(), c.at("skipped").get<std::size_t>()};
    const Json& mt = j.at("metrics");
    m.metrics = {mean_std_from(mt.at("wc")), mean_std_from(mt.at("ss")),
                 mean_std_from(mt.at("fact")), mean_std_from(mt.at("total")),
                 mt.at("median_total").get<double>()};
    for (const auto& [name, digest] : j.at("exports").items()) {
      m.digests[name] = digest.get<std::string>();
    }
    for (const auto& s : j.value("skipped", Json::array())) {
      m.skipped.push_back({s.at("id").get<std::string>(), s.at("reason").get<std::string>()});
    }
    m.config_json = j.value("config", Json::object()).dump(2);
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed manifest: ") + e.what());
  }
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw Error(ErrorKind::kRunLocked, "run directory is locked: " + path_.string());
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

fs::path RunState::step_dir(int step) const { return run_dir / "steps" / std::to_string(step); }

std::string RunState::endpoint_for_step(int step) const {
  if (step == 0) return config.endpoints.inference;
  auto it = registrations.find(step - 1);
  if (it == registrations.end()) {
    throw Error(ErrorKind::kAwaitingTrainer,
                "no trained model registered for step " + std::to_string(step - 1));
  }
  return it->second;
}

std::vector<double> RunState::median_history() const {
  std::vector<double> h;
  for (const auto& m : manifests) h.push_back(m.metrics.median_total);
  return h;
}

namespace {

std::string run_json(const RunConfig& config) {
  Json j = Json::parse(config.to_json());
  j["base_dir"] = fs::absolute(config.base_dir).string();
  return j.dump(2) + "\n";
}

}  // namespace

RunState init_run(const fs::path& run_dir, const RunConfig& config) {
  fs::create_directories(run_dir / "steps");
  const fs::path run_file = run_dir / "run.json";
  if (!fs::exists(run_file)) write_file_atomic(run_file, run_json(config));
  return open_run(run_dir);
}

RunState open_run(const fs::path& run_dir) {
  RunState state;
  state.run_dir = run_dir;
  const fs::path run_file = run_dir / "run.json";
  if (!fs::exists(run_file)) throw Error(ErrorKind::kIo, "no run.json in " + run_dir.string());
  state.config = RunConfig::from_json(read_file(run_file), run_dir);
  state.config.apply_environment();
  for (int step = 0;; ++step) {
    const fs::path manifest = state.step_dir(step) / "manifest.json";
    if (!fs::exists(manifest)) break;
    state.manifests.push_back(StepManifest::from_json(read_file(manifest)));
    const fs::path handoff = state.step_dir(step) / "handoff.json";
    if (fs::exists(handoff)) {
      state.registrations[step] = Json::parse(read_file(handoff)).at("endpoint").get<std::string>();
    }
  }
  return state;
}

namespace {

Json trainer_handoff(const RunConfig& config, int step) {
  // Initial rate for SFT and the first DPO round, the later rate afterwards.
  const double lr = step <= 1 ? config.trainer.lr_initial : config.trainer.lr_later;
  return {{"learning_rate", lr},
          {"warmup_ratio", config.trainer.warmup_ratio},
          {"beta", config.trainer.beta},
          {"objective", step == 0 ? "sft" : "dpo"}};
}

StepArtifacts run_step_in(RunState& state, int step, const fs::path& work) {
  const RunConfig& cfg = state.config;
  const std::string endpoint = state.endpoint_for_step(step);

  auto datasets = load_datasets(cfg);
  std::vector<Dataset> train = datasets;
  if (!cfg.test_name.empty()) train = leave_one_out_split(datasets, cfg.test_name).train;
  const std::vector<Instance> instances = usable_instances(train);
  std::map<std::string, const Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  auto client = make_inference_client(cfg.resolve_endpoint(endpoint), cfg.retry);
  SampleOptions sample_opts{cfg.model, cfg.max_in_flight};
  SampleOutcome sampled = sample_instances(instances, cfg.effective_sampling(), *client, sample_opts);
  if (!instances.empty() && sampled.sets.empty()) {
    throw Error(ErrorKind::kEndpointUnavailable,
                "no question could be sampled from " + endpoint + ": " +
                    sampled.rejected.front().reason);
  }

  std::vector<ScoreJob> jobs;
  for (const auto& set : sampled.sets) {
    for (const auto& r : set.responses) jobs.push_back({by_id.at(set.instance_id), r.text});
  }
  const auto clients = ScoringClients::from_urls(cfg.endpoints.similarity,
                                                 cfg.endpoints.entailment, cfg.retry);
  const auto reports = score_batch(jobs, clients, cfg.weights, cfg.max_in_flight);

  std::vector<ScoreRecord> records;
  std::size_t job = 0;
  for (const auto& set : sampled.sets) {
    for (const auto& r : set.responses) {
      records.push_back({by_id.at(set.instance_id)->question, r.temperature,
                         {set.instance_id, r.index, r.text, reports[job++]}});
    }
  }

  StepManifest m;
  m.step_index = step;
  m.kind = step == 0 ? "sft" : "dpo";
  m.model_endpoint = endpoint;
  m.reference_endpoint = cfg.endpoints.reference;
  m.counts.questions = instances.size();
  m.counts.sampled = sampled.sets.size();
  m.counts.responses = records.size();
  m.skipped = sampled.rejected;
  m.metrics = summarize_records(records);
  m.config_json = cfg.to_json();

  m.digests["samples.jsonl"] = write_sampled_sets(sampled.sets, work / "samples.jsonl");
  m.digests["scores.jsonl"] = write_score_records(records, work / "scores.jsonl");

  const auto groups = group_by_instance(records);
  if (step == 0) {
    std::vector<SftExample> examples;
    for (const auto& group : groups) {
      std::vector<ScoredResponse> responses;
      for (const auto& r : group) responses.push_back(r.response);
      examples.push_back(select_sft_label(rank_responses(responses), group.front().question));
    }
    m.counts.sft_examples = examples.size();
    m.digests["sft.jsonl"] = export_sft(examples, work / "sft.jsonl");
  } else {
    std::vector<PreferencePair> pairs;
    for (const auto& group : groups) {
      std::vector<ScoredResponse> responses;
      for (const auto& r : group) responses.push_back(r.response);
      InstancePairing ip = pair_instance(responses, group.front().question, cfg.pairing_options());
      if (!ip.skip_reason.empty()) {
        spdlog::info("step {}: skipping {} for DPO ({})", step, group.front().response.instance_id,
                     ip.skip_reason);
        m.skipped.push_back({group.front().response.instance_id, ip.skip_reason});
      }
      pairs.insert(pairs.end(), ip.pairs.begin(), ip.pairs.end());
    }
    m.counts.pairs = pairs.size();
    m.digests["dpo.jsonl"] = export_dpo(pairs, work / "dpo.jsonl");
  }
  m.counts.skipped = m.skipped.size();

  Json handoff_meta = trainer_handoff(cfg, step);
  write_file_atomic(work / "trainer.json", handoff_meta.dump(2) + "\n");

  const std::string manifest_text = m.to_json();
  write_file_atomic(work / "manifest.json", manifest_text);
  return {m, state.step_dir(step), sha256_hex(manifest_text)};
}

}  // namespace

StepArtifacts run_step(RunState& state) {
  state.config.validate();
  const int step = state.next_step();
  if (step >= state.config.max_steps) {
    throw Error(ErrorKind::kInvalidArgument,
                "run already has max_steps=" + std::to_string(state.config.max_steps) + " steps");
  }
  const fs::path final_dir = state.step_dir(step);
  fs::path work = final_dir;
  work += ".partial";
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);
  StepArtifacts artifacts;
  try {
    artifacts = run_step_in(state, step, work);
    fs::remove_all(final_dir, ec);
    fs::rename(work, final_dir);
  } catch (...) {
    fs::remove_all(work, ec);
    throw;
  }
  state.manifests.push_back(artifacts.manifest);
  spdlog::info("step {} done: {} responses, {} sft, {} pairs, {} skipped", step,
               artifacts.manifest.counts.responses, artifacts.manifest.counts.sft_examples,
               artifacts.manifest.counts.pairs, artifacts.manifest.counts.skipped);
  return artifacts;
}

void register_trained_model(RunState& state, int step, const std::string& endpoint) {
  if (step < 0 || step >= static_cast<int>(state.manifests.size())) {
    throw Error(ErrorKind::kUnknownStep, "no manifest for step " + std::to_string(step));
  }
  if (state.registrations.count(step) > 0) {
    throw Error(ErrorKind::kDuplicateRegistration,
                "step " + std::to_string(step) + " already has a registered model");
  }
  Json j;
  j["step"] = step;
  j["endpoint"] = endpoint;
  write_file_atomic(state.step_dir(step) / "handoff.json", j.dump(2) + "\n");
  state.registrations[step] = endpoint;
}

std::string_view to_string(ConvergenceDecision d) {
  switch (d) {
    case ConvergenceDecision::kContinue: return "continue";
    case ConvergenceDecision::kConverged: return "converged";
    case ConvergenceDecision::kMaxStepsReached: return "max_steps_reached";
  }
  return "continue";
}

ConvergenceDecision check_convergence(const std::vector<double>& history, double epsilon,
                                      int max_steps) {
  if (history.size() >= 2) {
    const double improvement = history.back() - history[history.size() - 2];
    if (improvement < epsilon) return ConvergenceDecision::kConverged;
  }
  if (static_cast<int>(history.size()) >= max_steps) return ConvergenceDecision::kMaxStepsReached;
  return ConvergenceDecision::kContinue;
}

LoopResult run_loop(RunState& state, bool mock_trainer) {
  LoopResult result;
  result.decision = check_convergence(state.median_history(), state.config.convergence_epsilon,
                                      state.config.max_steps);
  while (result.decision == ConvergenceDecision::kContinue) {
    const int step = state.next_step();
    if (step > 0 && state.registrations.count(step - 1) == 0) {
      if (!mock_trainer) {
        result.awaiting_trainer = true;
        break;
      }
      register_trained_model(state, step - 1, state.endpoint_for_step(step - 1));
    }
    result.steps.push_back(run_step(state));
    result.decision = check_convergence(state.median_history(), state.config.convergence_epsilon,
                                        state.config.max_steps);
  }
  return result;
}

std::vector<std::string> verify_manifests(const RunState& state) {
  std::vector<std::string> bad;
  for (const auto& m : state.manifests) {
    for (const auto& [name, digest] : m.digests) {
      const fs::path file = state.step_dir(m.step_index) / name;
      if (!fs::exists(file) || sha256_file(file) != digest) bad.push_back(file.string());
    }
  }
  return bad;
}

}  // namespace forge
