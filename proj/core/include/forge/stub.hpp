#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "forge/generation.hpp"

namespace forge {

struct StubEntry {
  std::string deterministic;
  std::vector<std::string> samples;
  std::optional<std::vector<double>> token_logprobs;
};

// Canned completions keyed by the SHA-256 of the prompt.
//
// File layout (JSON):
//   {"entries": [{"prompt" | "prompt_sha256": ..., "deterministic": ...,
//                 "samples": [...], "token_logprobs": [...]?}],
//    "default": {"deterministic": ..., "samples": [...]}?,
//    "logprob_scale": 1.0?,  // enables echo-mode scoring
//    "fail_first": 0?}       // HTTP server answers 503 this many times
//
// Temperature 0 returns `deterministic`. Sampled requests return
// samples[(seed - 1) mod n], seed defaulting to 1, so with run seed 0 slot s
// maps to samples[s - 1].
class StubFixtures {
 public:
  static StubFixtures load(const std::filesystem::path& path);
  static StubFixtures parse(std::string_view json);

  void add(const std::string& prompt, StubEntry entry);
  void set_default(StubEntry entry) { default_ = std::move(entry); }
  void set_logprob_scale(std::optional<double> scale) { logprob_scale_ = scale; }
  void set_fail_first(int n) { fail_first_ = n; }

  std::string to_json() const;

  // Throws Error(kUnknownFixture) when the prompt has no entry and there is
  // no default; Error(kMissingLogprobs) for echo requests without a scale.
  CompletionResponse complete(const CompletionRequest& request) const;

  int fail_first() const { return fail_first_; }

 private:
  std::map<std::string, StubEntry> entries_;  // prompt sha256 -> entry
  std::optional<StubEntry> default_;
  std::optional<double> logprob_scale_;
  int fail_first_ = 0;
};

// Per-token pseudo log-probabilities for `text`: every whitespace token gets
// -scale * (0.05 + u) with u in [0, 1) derived from the token's hash.
std::vector<double> pseudo_logprobs(std::string_view text, double scale);

class StubInferenceClient final : public InferenceClient {
 public:
  explicit StubInferenceClient(StubFixtures fixtures) : fixtures_(std::move(fixtures)) {}
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  StubFixtures fixtures_;
};

// HTTP stub: /v1/complete from fixtures plus /v1/entail and /v1/similarity
// answered by the in-tree mock scorers. Runs on a background thread.
class StubServer {
 public:
  explicit StubServer(StubFixtures fixtures);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds host:port (port 0 picks a free one) and starts serving.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);
  void stop();

  std::string url() const;
  int port() const { return port_; }
  std::size_t requests_served() const { return served_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  std::string host_;
  std::atomic<std::size_t> served_{0};
};

}  // namespace forge
