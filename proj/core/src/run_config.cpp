#include "forge/run_config.hpp"

#include <cmath>
#include <cstdlib>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "json_util.hpp"

namespace forge {

void RunConfig::validate() const {
  weights.validate();
  sampling.validate();
  if (max_steps < 1) throw Error(ErrorKind::kInvalidArgument, "max_steps must be >= 1");
  if (!(convergence_epsilon >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "convergence_epsilon must be >= 0");
  }
  if (!std::isfinite(threshold)) throw Error(ErrorKind::kInvalidArgument, "threshold must be finite");
  if (datasets.empty()) throw Error(ErrorKind::kInvalidArgument, "run config lists no datasets");
  if (max_in_flight < 1) throw Error(ErrorKind::kInvalidArgument, "max_in_flight must be >= 1");
}

void RunConfig::apply_environment() {
  const auto fill = [](std::string& slot, const char* var, const char* fallback) {
    if (!slot.empty()) return;
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') {
      slot = v;
    } else if (fallback != nullptr) {
      slot = fallback;
    }
  };
  fill(endpoints.inference, "FORGE_INFER_URL", nullptr);
  fill(endpoints.similarity, "FORGE_SIM_URL", "mock");
  fill(endpoints.entailment, "FORGE_ENTAIL_URL", "mock");
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::string RunConfig::resolve_endpoint(const std::string& endpoint) const {
  constexpr std::string_view kStub = "stub:";
  if (endpoint.rfind(kStub, 0) != 0) return endpoint;
  return std::string(kStub) + resolve(endpoint.substr(kStub.size())).string();
}

SamplingPolicy RunConfig::effective_sampling() const {
  SamplingPolicy p = sampling;
  if (!p.seed) p.seed = seed;
  return p;
}

std::string RunConfig::to_json() const {
  Json j;
  j["weights"] = {{"alpha1", weights.alpha1}, {"alpha2", weights.alpha2}, {"alpha3", weights.alpha3}};
  j["threshold"] = threshold;
  Json s;
  s["k"] = sampling.k;
  s["deterministic_temperature"] = sampling.deterministic_temperature;
  s["sample_temperature"] = sampling.sample_temperature;
  s["max_tokens"] = sampling.max_tokens;
  s["seed"] = sampling.seed ? Json(*sampling.seed) : Json(nullptr);
  s["logprobs"] = sampling.request_logprobs;
  j["sampling"] = s;
  j["pairing"] = std::string(to_string(pairing));
  j["fallback_best_vs_worst"] = fallback_best_vs_worst;
  j["datasets"] = Json::array();
  for (const auto& d : datasets) j["datasets"].push_back({{"name", d.name}, {"path", d.path}});
  j["test_name"] = test_name;
  j["endpoints"] = {{"inference", endpoints.inference},
                    {"similarity", endpoints.similarity},
                    {"entailment", endpoints.entailment},
                    {"reference", endpoints.reference}};
  j["model"] = model;
  j["max_steps"] = max_steps;
  j["convergence_epsilon"] = convergence_epsilon;
  j["trainer_metadata"] = {{"lr_initial", trainer.lr_initial},
                           {"warmup_ratio", trainer.warmup_ratio},
                           {"lr_later", trainer.lr_later},
                           {"beta", trainer.beta}};
  j["seed"] = seed;
  j["max_in_flight"] = max_in_flight;
  j["retry"] = {{"attempts", retry.attempts},
                {"base_delay_ms", retry.base_delay.count()},
                {"max_delay_ms", retry.max_delay.count()},
                {"jitter", retry.jitter}};
  j["mock_trainer"] = mock_trainer;
  return j.dump(2);
}

RunConfig RunConfig::from_json(std::string_view text, std::filesystem::path base_dir) {
  RunConfig c;
  c.base_dir = std::move(base_dir);
  try {
    const Json j = Json::parse(text);
    if (j.contains("weights")) {
      const Json& w = j["weights"];
      c.weights = {w.value("alpha1", 1.0), w.value("alpha2", 1.0), w.value("alpha3", 1.0)};
    }
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("sampling")) {
      const Json& s = j["sampling"];
      c.sampling.k = s.value("k", c.sampling.k);
      c.sampling.deterministic_temperature =
          s.value("deterministic_temperature", c.sampling.deterministic_temperature);
      c.sampling.sample_temperature = s.value("sample_temperature", c.sampling.sample_temperature);
      c.sampling.max_tokens = s.value("max_tokens", c.sampling.max_tokens);
      if (s.contains("seed") && !s["seed"].is_null()) c.sampling.seed = s["seed"].get<std::int64_t>();
      c.sampling.request_logprobs = s.value("logprobs", false);
    }
    c.pairing = parse_pairing_strategy(j.value("pairing", std::string("cross_product")));
    c.fallback_best_vs_worst = j.value("fallback_best_vs_worst", false);
    for (const auto& d : j.value("datasets", Json::array())) {
      c.datasets.push_back({d.at("name").get<std::string>(), d.at("path").get<std::string>()});
    }
    c.test_name = j.value("test_name", "");
    if (j.contains("endpoints")) {
      const Json& e = j["endpoints"];
      c.endpoints = {e.value("inference", ""), e.value("similarity", ""),
                     e.value("entailment", ""), e.value("reference", "")};
    }
    c.model = j.value("model", c.model);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.convergence_epsilon = j.value("convergence_epsilon", c.convergence_epsilon);
    if (j.contains("trainer_metadata")) {
      const Json& t = j["trainer_metadata"];
      c.trainer = {t.value("lr_initial", 5e-7), t.value("warmup_ratio", 0.1),
                   t.value("lr_later", 1e-7), t.value("beta", 0.01)};
    }
    c.seed = j.value("seed", std::int64_t{0});
    c.max_in_flight = j.value("max_in_flight", std::size_t{8});
    if (j.contains("retry")) {
      const Json& r = j["retry"];
      c.retry.attempts = r.value("attempts", 3);
      c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", 100));
      c.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", 2000));
      c.retry.jitter = r.value("jitter", 0.5);
    }
    c.retry.seed = static_cast<std::uint64_t>(c.seed);
    c.mock_trainer = j.value("mock_trainer", false);
    if (j.contains("base_dir")) c.base_dir = j["base_dir"].get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("malformed run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json(read_file(path), std::filesystem::absolute(path).parent_path());
}

std::vector<Dataset> load_datasets(const RunConfig& config) {
  std::vector<Dataset> out;
  for (const auto& ref : config.datasets) {
    out.push_back(load_dataset_strict(config.resolve(ref.path), ref.name));
  }
  return out;
}

}  // namespace forge
