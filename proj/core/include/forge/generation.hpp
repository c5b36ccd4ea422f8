#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/dataset.hpp"
#include "forge/http_client.hpp"

namespace forge {

struct SamplingPolicy {
  int k = 6;
  double deterministic_temperature = 0.0;
  double sample_temperature = 1.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  bool request_logprobs = false;

  void validate() const;
  double temperature_for(int slot) const {
    return slot == 0 ? deterministic_temperature : sample_temperature;
  }
};

// Wire body of POST /v1/complete.
struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  bool logprobs = false;
  bool echo = false;  // score the prompt itself (max_tokens 0)

  std::string to_json() const;
  static CompletionRequest from_json(std::string_view body);
};

struct CompletionResponse {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;

  std::string to_json() const;
  static CompletionResponse from_json(std::string_view body);
};

class InferenceClient {
 public:
  virtual ~InferenceClient() = default;
  // Must be safe to call from several threads at once.
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

class HttpInferenceClient final : public InferenceClient {
 public:
  HttpInferenceClient(std::string base_url, RetryPolicy retry);
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  HttpJsonClient http_;
};

// "stub:<fixtures.json>" gives an in-process stub, anything else is an HTTP
// base URL.
std::shared_ptr<InferenceClient> make_inference_client(const std::string& endpoint,
                                                       RetryPolicy retry);

struct SampledResponse {
  int index = 0;
  double temperature = 0.0;
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
  bool degenerate = false;  // empty completion
};

struct SampledSet {
  std::string instance_id;
  std::vector<SampledResponse> responses;  // slot order; slot 0 deterministic

  std::string to_json_line() const;
  static SampledSet from_json_line(std::string_view line);
};

struct SampleOptions {
  std::string model = "policy";
  std::size_t max_in_flight = 8;
};

// Request for slot `slot` of a question.
CompletionRequest slot_request(std::string_view question, const SamplingPolicy& policy,
                               int slot, const std::string& model);

// One deterministic and k-1 sampled completions. Throws
// Error(kEndpointUnavailable) when every slot fails after retries and
// Error(kPartialSet) when only some do; no partial set is ever returned.
SampledSet sample_responses(std::string_view instance_id, std::string_view question,
                            const SamplingPolicy& policy, InferenceClient& client,
                            const SampleOptions& options = {});

struct RejectedQuestion {
  std::string instance_id;
  std::string reason;
};

struct SampleOutcome {
  std::vector<SampledSet> sets;  // input order, failed questions omitted
  std::vector<RejectedQuestion> rejected;
};

// Samples every instance with at most options.max_in_flight requests in
// flight across all questions.
SampleOutcome sample_instances(const std::vector<Instance>& instances,
                               const SamplingPolicy& policy, InferenceClient& client,
                               const SampleOptions& options = {});

}  // namespace forge
