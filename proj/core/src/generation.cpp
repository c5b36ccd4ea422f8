#include "forge/generation.hpp"

#include <spdlog/spdlog.h>

#include <mutex>

#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/stub.hpp"
#include "forge/text.hpp"
#include "json_util.hpp"

namespace forge {

void SamplingPolicy::validate() const {
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "sampling needs k >= 1");
  if (deterministic_temperature < 0.0 || sample_temperature < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "temperatures must be >= 0");
  }
  if (max_tokens < 1) throw Error(ErrorKind::kInvalidArgument, "max_tokens must be >= 1");
}

std::string CompletionRequest::to_json() const {
  Json j;
  j["model"] = model;
  j["prompt"] = prompt;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  if (seed) j["seed"] = *seed;
  if (logprobs) j["logprobs"] = true;
  if (echo) j["echo"] = true;
  return j.dump();
}

CompletionRequest CompletionRequest::from_json(std::string_view body) {
  try {
    const Json j = Json::parse(body);
    CompletionRequest r;
    r.model = j.value("model", "");
    r.prompt = j.at("prompt").get<std::string>();
    r.temperature = j.value("temperature", 0.0);
    r.max_tokens = j.value("max_tokens", 512);
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::int64_t>();
    r.logprobs = j.value("logprobs", false);
    r.echo = j.value("echo", false);
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed completion request: ") + e.what());
  }
}

std::string CompletionResponse::to_json() const {
  Json j;
  j["text"] = text;
  if (token_logprobs) j["token_logprobs"] = *token_logprobs;
  return j.dump();
}

CompletionResponse CompletionResponse::from_json(std::string_view body) {
  try {
    const Json j = Json::parse(body);
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
      r.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed completion response: ") + e.what());
  }
}

HttpInferenceClient::HttpInferenceClient(std::string base_url, RetryPolicy retry)
    : http_(std::move(base_url), retry) {}

CompletionResponse HttpInferenceClient::complete(const CompletionRequest& request) {
  return CompletionResponse::from_json(http_.post("/v1/complete", request.to_json()));
}

std::shared_ptr<InferenceClient> make_inference_client(const std::string& endpoint,
                                                       RetryPolicy retry) {
  constexpr std::string_view kStub = "stub:";
  if (endpoint.rfind(kStub, 0) == 0) {
    return std::make_shared<StubInferenceClient>(
        StubFixtures::load(endpoint.substr(kStub.size())));
  }
  if (endpoint.empty()) throw Error(ErrorKind::kInvalidArgument, "no inference endpoint configured");
  return std::make_shared<HttpInferenceClient>(endpoint, retry);
}

std::string SampledSet::to_json_line() const {
  Json j;
  j["id"] = instance_id;
  j["responses"] = Json::array();
  for (const auto& r : responses) {
    Json e;
    e["index"] = r.index;
    e["temperature"] = r.temperature;
    e["text"] = r.text;
    if (r.token_logprobs) e["token_logprobs"] = *r.token_logprobs;
    e["degenerate"] = r.degenerate;
    j["responses"].push_back(std::move(e));
  }
  return j.dump();
}

SampledSet SampledSet::from_json_line(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    SampledSet set;
    set.instance_id = j.at("id").get<std::string>();
    for (const auto& e : j.at("responses")) {
      SampledResponse r;
      r.index = e.at("index").get<int>();
      r.temperature = e.value("temperature", 0.0);
      r.text = e.at("text").get<std::string>();
      if (e.contains("token_logprobs") && !e["token_logprobs"].is_null()) {
        r.token_logprobs = e["token_logprobs"].get<std::vector<double>>();
      }
      r.degenerate = e.value("degenerate", r.text.empty());
      set.responses.push_back(std::move(r));
    }
    return set;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed samples line: ") + e.what());
  }
}

CompletionRequest slot_request(std::string_view question, const SamplingPolicy& policy,
                               int slot, const std::string& model) {
  CompletionRequest req;
  req.model = model;
  req.prompt = std::string(question);
  req.temperature = policy.temperature_for(slot);
  req.max_tokens = policy.max_tokens;
  if (policy.seed) req.seed = *policy.seed + slot;
  req.logprobs = policy.request_logprobs;
  return req;
}

namespace {

struct SlotResult {
  std::optional<CompletionResponse> response;
  std::string error;
  ErrorKind kind = ErrorKind::kClient;
};

SlotResult run_slot(InferenceClient& client, const CompletionRequest& req) {
  SlotResult out;
  try {
    out.response = client.complete(req);
  } catch (const Error& e) {
    out.error = e.what();
    out.kind = e.kind();
  }
  return out;
}

SampledSet assemble(std::string_view instance_id, const SamplingPolicy& policy,
                    std::vector<SlotResult>& slots) {
  std::vector<int> failed;
  std::string first_error;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s].response) {
      failed.push_back(static_cast<int>(s));
      if (first_error.empty()) first_error = slots[s].error;
    }
  }
  if (!failed.empty()) {
    std::string which;
    for (int s : failed) which += (which.empty() ? "" : ",") + std::to_string(s);
    if (failed.size() == slots.size()) {
      throw Error(ErrorKind::kEndpointUnavailable,
                  "all slots failed for " + std::string(instance_id) + ": " + first_error);
    }
    throw Error(ErrorKind::kPartialSet, "instance " + std::string(instance_id) +
                                            " slots [" + which + "] failed: " + first_error);
  }
  SampledSet set;
  set.instance_id = std::string(instance_id);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    SampledResponse r;
    r.index = static_cast<int>(s);
    r.temperature = policy.temperature_for(r.index);
    r.text = std::move(slots[s].response->text);
    r.token_logprobs = std::move(slots[s].response->token_logprobs);
    r.degenerate = trim(r.text).empty();
    set.responses.push_back(std::move(r));
  }
  return set;
}

}  // namespace

SampledSet sample_responses(std::string_view instance_id, std::string_view question,
                            const SamplingPolicy& policy, InferenceClient& client,
                            const SampleOptions& options) {
  policy.validate();
  if (trim(question).empty()) throw Error(ErrorKind::kEmptyQuestion, "question is empty");
  std::vector<SlotResult> slots(static_cast<std::size_t>(policy.k));
  parallel_for(slots.size(), options.max_in_flight, [&](std::size_t s) {
    slots[s] = run_slot(client, slot_request(question, policy, static_cast<int>(s), options.model));
  });
  return assemble(instance_id, policy, slots);
}

SampleOutcome sample_instances(const std::vector<Instance>& instances,
                               const SamplingPolicy& policy, InferenceClient& client,
                               const SampleOptions& options) {
  policy.validate();
  const auto k = static_cast<std::size_t>(policy.k);
  std::vector<SlotResult> slots(instances.size() * k);
  parallel_for(slots.size(), options.max_in_flight, [&](std::size_t job) {
    const Instance& inst = instances[job / k];
    slots[job] = run_slot(client, slot_request(inst.question, policy,
                                               static_cast<int>(job % k), options.model));
  });

  SampleOutcome outcome;
  for (std::size_t q = 0; q < instances.size(); ++q) {
    std::vector<SlotResult> mine(std::make_move_iterator(slots.begin() + q * k),
                                 std::make_move_iterator(slots.begin() + (q + 1) * k));
    try {
      outcome.sets.push_back(assemble(instances[q].id, policy, mine));
    } catch (const Error& e) {
      spdlog::warn("rejecting {} for this step: {}", instances[q].id, e.what());
      outcome.rejected.push_back({instances[q].id, e.what()});
    }
  }
  return outcome;
}

}  // namespace forge
