// forge: command-line front end to the preference-data pipeline.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/annotation.hpp"
#include "forge/dataset.hpp"
#include "forge/digest.hpp"
#include "forge/dpo.hpp"
#include "forge/error.hpp"
#include "forge/evaluation.hpp"
#include "forge/generation.hpp"
#include "forge/orchestrator.hpp"
#include "forge/preference.hpp"
#include "forge/records.hpp"
#include "forge/run_config.hpp"
#include "forge/scoring.hpp"
#include "forge/stub.hpp"
#include "forge/sweep.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size()) {
        throw forge::Error(forge::ErrorKind::kInvalidArgument, "not a number: '" + item + "'");
      }
      out.push_back(v);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

forge::CompositeWeights parse_alpha(const std::string& csv) {
  const auto v = parse_doubles(csv);
  if (v.size() != 3) {
    throw forge::Error(forge::ErrorKind::kInvalidArgument, "--alpha takes three values a1,a2,a3");
  }
  forge::CompositeWeights w{v[0], v[1], v[2]};
  w.validate();
  return w;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

std::vector<forge::ScoreRecord> score_sets(const forge::Dataset& dataset,
                                           const std::vector<forge::SampledSet>& sets,
                                           const forge::ScoringClients& clients,
                                           const forge::CompositeWeights& w,
                                           std::size_t max_in_flight) {
  std::vector<forge::ScoreJob> jobs;
  std::vector<std::pair<const forge::Instance*, const forge::SampledResponse*>> refs;
  for (const auto& set : sets) {
    const forge::Instance* inst = dataset.find(set.instance_id);
    if (inst == nullptr) {
      throw forge::Error(forge::ErrorKind::kInvalidArgument,
                         "responses mention unknown instance " + set.instance_id);
    }
    if (inst->ambiguous) {
      spdlog::warn("skipping ambiguous instance {}", inst->id);
      continue;
    }
    for (const auto& r : set.responses) {
      jobs.push_back({inst, r.text});
      refs.emplace_back(inst, &r);
    }
  }
  const auto reports = forge::score_batch(jobs, clients, w, max_in_flight);
  std::vector<forge::ScoreRecord> records;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto* inst = refs[i].first;
    const auto* r = refs[i].second;
    records.push_back({inst->question, r->temperature, {inst->id, r->index, r->text, reports[i]}});
  }
  return records;
}

void print_step(const forge::StepArtifacts& a) {
  std::cout << "step " << a.manifest.step_index << " (" << a.manifest.kind << ") -> "
            << a.dir.string() << "\n";
  for (const auto& [file, digest] : a.manifest.digests) {
    std::cout << "  " << file << " " << digest << "\n";
  }
  std::cout << "  median total " << a.manifest.metrics.median_total << ", skipped "
            << a.manifest.counts.skipped << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("forge");
  spdlog::set_default_logger(logger);

  CLI::App app{"forge: turns long-form medical QA into scored preference data"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // ingest / stats
  auto* ingest = app.add_subcommand("ingest", "normalise a raw QA file into dataset JSONL");
  std::string ingest_in, ingest_out, ingest_name;
  ingest->add_option("--in", ingest_in, "raw JSON array or JSONL")->required();
  ingest->add_option("--out", ingest_out, "output dataset JSONL")->required();
  ingest->add_option("--name", ingest_name, "dataset name")->required();

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  std::string stats_path;
  stats->add_option("dataset", stats_path)->required();

  // score
  auto* score = app.add_subcommand("score", "score sampled responses against a dataset");
  std::string score_dataset, score_responses, score_out, score_alpha = "1,1,1";
  std::string score_sim, score_entail;
  std::size_t score_inflight = 8;
  score->add_option("--dataset", score_dataset)->required();
  score->add_option("--responses", score_responses, "samples JSONL")->required();
  score->add_option("--alpha", score_alpha, "a1,a2,a3");
  score->add_option("--out", score_out, "scores JSONL (stdout summary only if omitted)");
  score->add_option("--sim-url", score_sim, "similarity endpoint or 'mock'");
  score->add_option("--entail-url", score_entail, "entailment endpoint or 'mock'");
  score->add_option("--max-in-flight", score_inflight);

  // sample
  auto* sample = app.add_subcommand("sample", "sample k responses per question");
  std::string sample_dataset, sample_endpoint, sample_out, sample_model = "policy";
  forge::SamplingPolicy sample_policy;
  std::int64_t sample_seed = 0;
  std::size_t sample_inflight = 8;
  sample->add_option("--dataset", sample_dataset)->required();
  sample->add_option("--endpoint", sample_endpoint, "URL or stub:<fixtures.json>");
  sample->add_option("--k", sample_policy.k);
  sample->add_option("--temp", sample_policy.sample_temperature);
  sample->add_option("--max-tokens", sample_policy.max_tokens);
  sample->add_option("--seed", sample_seed);
  sample->add_option("--model", sample_model);
  sample->add_option("--max-in-flight", sample_inflight);
  sample->add_option("--out", sample_out)->required();

  auto* stub = app.add_subcommand("stub-server", "serve canned completions and mock scorers");
  std::string stub_fixtures, stub_host = "127.0.0.1";
  int stub_port = 8089;
  stub->add_option("--fixtures", stub_fixtures)->required();
  stub->add_option("--host", stub_host);
  stub->add_option("--port", stub_port);

  // pair
  auto* pair = app.add_subcommand("pair", "SFT labels and preference pairs from scores");
  std::string pair_scores, pair_sft, pair_dpo, pair_strategy = "cross_product";
  double pair_threshold = 200.0;
  bool pair_fallback = false;
  pair->add_option("--scores", pair_scores)->required();
  pair->add_option("--threshold", pair_threshold);
  pair->add_option("--strategy", pair_strategy, "cross_product|best_vs_worst|best_vs_all");
  pair->add_flag("--fallback-best-vs-worst", pair_fallback);
  pair->add_option("--out-sft", pair_sft);
  pair->add_option("--out-dpo", pair_dpo);

  auto* dpo = app.add_subcommand("dpo-report", "DPO loss and reward margins for exported pairs");
  std::string dpo_pairs, dpo_policy, dpo_reference, dpo_model = "policy", dpo_out;
  double dpo_beta = 0.01;
  dpo->add_option("--pairs", dpo_pairs)->required();
  dpo->add_option("--policy", dpo_policy)->required();
  dpo->add_option("--reference", dpo_reference)->required();
  dpo->add_option("--beta", dpo_beta);
  dpo->add_option("--model", dpo_model);
  dpo->add_option("--out", dpo_out);

  // run / step / register
  auto* run = app.add_subcommand("run", "run the iterative loop from a config");
  std::string run_config, run_dir;
  bool run_mock_trainer = false;
  run->add_option("--config", run_config)->required();
  run->add_option("--run", run_dir, "run directory (default: run/ next to the config)");
  run->add_flag("--mock-trainer", run_mock_trainer, "register each step's endpoint as its trained model");

  auto* step = app.add_subcommand("step", "run the next step of an existing run");
  std::string step_dir;
  step->add_option("--run", step_dir)->required();

  auto* reg = app.add_subcommand("register", "register the model trained on a step's exports");
  std::string reg_dir, reg_endpoint;
  int reg_step = 0;
  reg->add_option("--run", reg_dir)->required();
  reg->add_option("--step", reg_step)->required();
  reg->add_option("--endpoint", reg_endpoint)->required();

  auto* verify = app.add_subcommand("verify", "re-hash every export in a run");
  std::string verify_dir;
  verify->add_option("--run", verify_dir)->required();

  // eval / sweep
  auto* eval = app.add_subcommand("eval", "sample and score a model on the held-out test split");
  std::string eval_endpoint, eval_test, eval_config, eval_out;
  eval->add_option("--endpoint", eval_endpoint)->required();
  eval->add_option("--test", eval_test, "test dataset name")->required();
  eval->add_option("--config", eval_config, "run config with datasets and scorer endpoints")->required();
  eval->add_option("--out", eval_out);

  auto* sweep = app.add_subcommand("sweep", "re-weight stored scores over a grid");
  std::string sweep_axis = "alpha3", sweep_grid, sweep_scores, sweep_alpha = "1,1,1", sweep_out;
  std::string sweep_strategy = "cross_product";
  double sweep_threshold = 200.0;
  sweep->add_option("--axis", sweep_axis, "alpha3|threshold");
  sweep->add_option("--grid", sweep_grid, "comma-separated values")->required();
  sweep->add_option("--scores", sweep_scores)->required();
  sweep->add_option("--alpha", sweep_alpha);
  sweep->add_option("--threshold", sweep_threshold);
  sweep->add_option("--strategy", sweep_strategy);
  sweep->add_option("--out", sweep_out);

  // annotation
  auto* make_tasks = app.add_subcommand("make-tasks", "blinded pairwise tasks from two answer sets");
  std::string mt_dataset, mt_a, mt_b, mt_label_a = "model", mt_label_b = "expert", mt_out;
  std::uint64_t mt_seed = 0;
  make_tasks->add_option("--dataset", mt_dataset)->required();
  make_tasks->add_option("--answers-a", mt_a, "JSONL {id, answer}; defaults to the dataset answers");
  make_tasks->add_option("--answers-b", mt_b, "JSONL {id, answer}; defaults to the dataset answers");
  make_tasks->add_option("--label-a", mt_label_a);
  make_tasks->add_option("--label-b", mt_label_b);
  make_tasks->add_option("--seed", mt_seed);
  make_tasks->add_option("--out", mt_out)->required();

  auto* serve = app.add_subcommand("serve-annotation", "expert annotation HTTP service");
  std::string serve_tasks, serve_records, serve_host = "127.0.0.1", serve_token;
  int serve_port = 8090;
  serve->add_option("--tasks", serve_tasks)->required();
  serve->add_option("--records", serve_records)->required();
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_option("--token", serve_token, "bearer token required on every request");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*ingest) {
      const auto result = forge::ingest_raw(ingest_in, ingest_name);
      for (const auto& w : result.warnings) spdlog::warn("{}", w);
      for (const auto& e : result.errors) {
        spdlog::error("line {}: {}: {}", e.line, e.field, e.detail);
      }
      forge::save_dataset(result.dataset, ingest_out);
      const auto s = forge::dataset_statistics(result.dataset);
      std::cout << "wrote " << s.n_instances << " instances (" << s.n_ambiguous
                << " ambiguous) to " << ingest_out << "\n";
      return result.ok() ? 0 : 2;
    }

    if (*stats) {
      const auto result = forge::load_dataset(stats_path, fs::path(stats_path).stem().string());
      for (const auto& e : result.errors) spdlog::error("line {}: {}: {}", e.line, e.field, e.detail);
      const auto s = forge::dataset_statistics(result.dataset);
      Json j;
      j["name"] = result.dataset.name;
      j["instances"] = s.n_instances;
      j["ambiguous"] = s.n_ambiguous;
      j["avg_answer_words"] = s.avg_answer_words ? Json(*s.avg_answer_words) : Json(nullptr);
      j["avg_must_have"] = s.avg_mh ? Json(*s.avg_mh) : Json(nullptr);
      j["avg_nice_to_have"] = s.avg_nh ? Json(*s.avg_nh) : Json(nullptr);
      j["schema_errors"] = result.errors.size();
      std::cout << j.dump(2) << "\n";
      return result.ok() ? 0 : 2;
    }

    if (*score) {
      const auto dataset = forge::load_dataset_strict(score_dataset, fs::path(score_dataset).stem().string());
      const auto sets = forge::load_sampled_sets(score_responses);
      const auto clients = forge::ScoringClients::from_urls(
          score_sim.empty() ? env_or("FORGE_SIM_URL", "mock") : score_sim,
          score_entail.empty() ? env_or("FORGE_ENTAIL_URL", "mock") : score_entail, {});
      const auto records = score_sets(dataset, sets, clients, parse_alpha(score_alpha), score_inflight);
      if (!score_out.empty()) {
        std::cout << forge::write_score_records(records, score_out) << "  " << score_out << "\n";
      }
      std::cout << forge::summarize_evaluation(records).to_json() << "\n";
      return 0;
    }

    if (*sample) {
      const auto dataset = forge::load_dataset_strict(sample_dataset, fs::path(sample_dataset).stem().string());
      if (sample_endpoint.empty()) sample_endpoint = env_or("FORGE_INFER_URL", "");
      if (sample_endpoint.empty()) {
        throw forge::Error(forge::ErrorKind::kInvalidArgument, "--endpoint or FORGE_INFER_URL is required");
      }
      sample_policy.seed = sample_seed;
      sample_policy.validate();
      auto client = forge::make_inference_client(sample_endpoint, {});
      std::vector<forge::Instance> usable;
      for (const auto& inst : dataset.instances) {
        if (!inst.ambiguous) usable.push_back(inst);
      }
      const auto outcome = forge::sample_instances(usable, sample_policy, *client,
                                                   {sample_model, sample_inflight});
      for (const auto& r : outcome.rejected) spdlog::warn("skipped {}: {}", r.instance_id, r.reason);
      std::cout << forge::write_sampled_sets(outcome.sets, sample_out) << "  " << sample_out << "\n";
      return outcome.sets.empty() && !usable.empty() ? 3 : 0;
    }

    if (*stub) {
      forge::StubServer server(forge::StubFixtures::load(stub_fixtures));
      spdlog::info("stub server on http://{}:{}", stub_host, stub_port);
      server.listen_blocking(stub_host, stub_port);
      return 0;
    }

    if (*pair) {
      const auto records = forge::load_score_records(pair_scores);
      const forge::PairingOptions opts{pair_threshold, forge::parse_pairing_strategy(pair_strategy),
                                       pair_fallback};
      std::vector<forge::SftExample> sft;
      std::vector<forge::PreferencePair> pairs;
      std::size_t skipped = 0;
      for (const auto& group : forge::group_by_instance(records)) {
        std::vector<forge::ScoredResponse> responses;
        for (const auto& r : group) responses.push_back(r.response);
        sft.push_back(forge::select_sft_label(forge::rank_responses(responses), group.front().question));
        auto ip = forge::pair_instance(responses, group.front().question, opts);
        if (!ip.skip_reason.empty()) {
          ++skipped;
          spdlog::info("{}: {}", group.front().response.instance_id, ip.skip_reason);
        }
        pairs.insert(pairs.end(), ip.pairs.begin(), ip.pairs.end());
      }
      std::cout << sft.size() << " sft labels, " << pairs.size() << " pairs, " << skipped
                << " instances without pairs\n";
      if (!pair_sft.empty()) std::cout << forge::export_sft(sft, pair_sft) << "  " << pair_sft << "\n";
      if (!pair_dpo.empty()) std::cout << forge::export_dpo(pairs, pair_dpo) << "  " << pair_dpo << "\n";
      return 0;
    }

    if (*dpo) {
      const auto pairs = forge::load_dpo(dpo_pairs);
      auto policy = forge::make_inference_client(dpo_policy, {});
      auto reference = forge::make_inference_client(dpo_reference, {});
      forge::DpoConfig cfg{dpo_beta};
      cfg.validate();
      const auto report = forge::dpo_report_for_pairs(pairs, *policy, *reference, cfg);
      const std::string text = report.to_json();
      if (!dpo_out.empty()) forge::write_file_atomic(dpo_out, text + "\n");
      std::cout << text << "\n";
      return 0;
    }

    if (*run) {
      auto config = forge::RunConfig::load(run_config);
      config.apply_environment();
      config.validate();
      const bool mock = run_mock_trainer || config.mock_trainer;
      const fs::path dir = run_dir.empty() ? fs::path(run_config).parent_path() / "run" : fs::path(run_dir);
      fs::create_directories(dir);
      forge::RunLock lock(dir);
      auto state = forge::init_run(dir, config);
      const auto result = forge::run_loop(state, mock);
      for (const auto& s : result.steps) print_step(s);
      if (result.awaiting_trainer) {
        std::cout << "awaiting trainer: register the model trained on step " << state.next_step() - 1
                  << " with `forge register --run " << dir.string() << " --step "
                  << state.next_step() - 1 << " --endpoint <url>`\n";
        return 0;
      }
      std::cout << "decision: " << forge::to_string(result.decision) << "\n";
      return 0;
    }

    if (*step) {
      forge::RunLock lock(step_dir);
      auto state = forge::open_run(step_dir);
      print_step(forge::run_step(state));
      return 0;
    }

    if (*reg) {
      forge::RunLock lock(reg_dir);
      auto state = forge::open_run(reg_dir);
      forge::register_trained_model(state, reg_step, reg_endpoint);
      std::cout << "registered " << reg_endpoint << " for step " << reg_step << "\n";
      return 0;
    }

    if (*verify) {
      const auto state = forge::open_run(verify_dir);
      const auto bad = forge::verify_manifests(state);
      for (const auto& b : bad) std::cout << "MISMATCH " << b << "\n";
      std::cout << state.manifests.size() << " steps, " << bad.size() << " mismatches\n";
      return bad.empty() ? 0 : 4;
    }

    if (*eval) {
      auto config = forge::RunConfig::load(eval_config);
      config.apply_environment();
      const auto datasets = forge::load_datasets(config);
      const auto split = forge::leave_one_out_split(datasets, eval_test);
      const auto report = forge::evaluate_model(eval_endpoint, split.test, config);
      const std::string text = report.to_json();
      if (!eval_out.empty()) forge::write_file_atomic(eval_out, text + "\n");
      std::cout << text << "\n";
      return 0;
    }

    if (*sweep) {
      const auto records = forge::load_score_records(sweep_scores);
      const forge::PairingOptions opts{sweep_threshold, forge::parse_pairing_strategy(sweep_strategy), false};
      const auto report = forge::sensitivity_sweep(forge::parse_sweep_axis(sweep_axis),
                                                   parse_doubles(sweep_grid), parse_alpha(sweep_alpha),
                                                   opts, records);
      const std::string text = report.to_json();
      if (!sweep_out.empty()) forge::write_file_atomic(sweep_out, text + "\n");
      std::cout << text << "\n";
      return 0;
    }

    if (*make_tasks) {
      const auto dataset = forge::load_dataset_strict(mt_dataset, fs::path(mt_dataset).stem().string());
      auto read_answers = [&](const std::string& path, const std::string& label) {
        forge::AnswerSource src{label, {}};
        if (path.empty()) {
          for (const auto& inst : dataset.instances) src.answers[inst.id] = inst.answer;
          return src;
        }
        std::size_t line_no = 0;
        std::string text = forge::read_file(path);
        std::size_t start = 0;
        while (start < text.size()) {
          std::size_t nl = text.find('\n', start);
          if (nl == std::string::npos) nl = text.size();
          const std::string line = text.substr(start, nl - start);
          start = nl + 1;
          ++line_no;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const Json j = Json::parse(line);
          src.answers[j.at("id").get<std::string>()] = j.at("answer").get<std::string>();
        }
        return src;
      };
      const auto a = read_answers(mt_a, mt_label_a);
      const auto b = read_answers(mt_b, mt_label_b);
      const auto created = forge::create_tasks(dataset.instances, a, b, mt_seed);
      for (const auto& r : created.rejected) spdlog::warn("no task for {}: {}", r.instance_id, r.reason);
      forge::save_tasks(created.tasks, mt_out);
      std::cout << created.tasks.size() << " tasks written to " << mt_out << "\n";
      return 0;
    }

    if (*serve) {
      auto store = std::make_shared<forge::AnnotationStore>(forge::load_tasks(serve_tasks), serve_records);
      forge::AnnotationServer server(store, {serve_token});
      spdlog::info("annotation service on http://{}:{}", serve_host, serve_port);
      server.listen_blocking(serve_host, serve_port);
      return 0;
    }
  } catch (const forge::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed JSON: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
