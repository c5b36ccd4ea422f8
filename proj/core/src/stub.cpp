#include "forge/stub.hpp"

#include <cstring>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/scoring.hpp"
#include "httplib.h"
#include "json_util.hpp"

namespace forge {
namespace {

StubEntry entry_from_json(const Json& j) {
  StubEntry e;
  e.deterministic = j.value("deterministic", "");
  if (j.contains("samples")) e.samples = j["samples"].get<std::vector<std::string>>();
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    e.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  }
  return e;
}

Json entry_to_json(const StubEntry& e) {
  Json j;
  j["deterministic"] = e.deterministic;
  j["samples"] = e.samples;
  if (e.token_logprobs) j["token_logprobs"] = *e.token_logprobs;
  return j;
}

}  // namespace

StubFixtures StubFixtures::parse(std::string_view text) {
  StubFixtures f;
  try {
    const Json j = Json::parse(text);
    for (const auto& e : j.value("entries", Json::array())) {
      std::string key;
      if (e.contains("prompt_sha256")) {
        key = e["prompt_sha256"].get<std::string>();
      } else {
        key = sha256_hex(e.at("prompt").get<std::string>());
      }
      f.entries_[key] = entry_from_json(e);
    }
    if (j.contains("default") && !j["default"].is_null()) f.default_ = entry_from_json(j["default"]);
    if (j.contains("logprob_scale") && !j["logprob_scale"].is_null()) {
      f.logprob_scale_ = j["logprob_scale"].get<double>();
    }
    f.fail_first_ = j.value("fail_first", 0);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed stub fixtures: ") + e.what());
  }
  return f;
}

StubFixtures StubFixtures::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

void StubFixtures::add(const std::string& prompt, StubEntry entry) {
  entries_[sha256_hex(prompt)] = std::move(entry);
}

std::string StubFixtures::to_json() const {
  Json j;
  j["entries"] = Json::array();
  for (const auto& [key, e] : entries_) {
    Json item = entry_to_json(e);
    item["prompt_sha256"] = key;
    j["entries"].push_back(std::move(item));
  }
  if (default_) j["default"] = entry_to_json(*default_);
  if (logprob_scale_) j["logprob_scale"] = *logprob_scale_;
  if (fail_first_ > 0) j["fail_first"] = fail_first_;
  return j.dump(2);
}

std::vector<double> pseudo_logprobs(std::string_view text, double scale) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == start) break;
    const std::string digest = sha256_hex(text.substr(start, i - start));
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < 13; ++b) {
      bits = bits * 16 + static_cast<std::uint64_t>(std::strchr("0123456789abcdef", digest[b]) -
                                                    "0123456789abcdef");
    }
    const double u = static_cast<double>(bits) / static_cast<double>(1ULL << 52);
    out.push_back(-scale * (0.05 + u));
  }
  return out;
}

CompletionResponse StubFixtures::complete(const CompletionRequest& request) const {
  CompletionResponse res;
  if (request.echo || request.max_tokens == 0) {
    if (!logprob_scale_) {
      throw Error(ErrorKind::kMissingLogprobs, "stub has no logprob_scale for echo scoring");
    }
    res.token_logprobs = pseudo_logprobs(request.prompt, *logprob_scale_);
    return res;
  }
  const StubEntry* entry = nullptr;
  if (auto it = entries_.find(sha256_hex(request.prompt)); it != entries_.end()) {
    entry = &it->second;
  } else if (default_) {
    entry = &*default_;
  } else {
    throw Error(ErrorKind::kUnknownFixture,
                "no stub fixture for prompt sha256 " + sha256_hex(request.prompt));
  }
  if (request.temperature == 0.0 || entry->samples.empty()) {
    res.text = entry->deterministic;
  } else {
    const auto n = static_cast<std::int64_t>(entry->samples.size());
    const std::int64_t seed = request.seed.value_or(1);
    res.text = entry->samples[static_cast<std::size_t>(((seed - 1) % n + n) % n)];
  }
  if (request.logprobs) {
    if (entry->token_logprobs) {
      res.token_logprobs = entry->token_logprobs;
    } else if (logprob_scale_) {
      res.token_logprobs = pseudo_logprobs(res.text, *logprob_scale_);
    }
  }
  return res;
}

CompletionResponse StubInferenceClient::complete(const CompletionRequest& request) {
  return fixtures_.complete(request);
}

struct StubServer::Impl {
  StubFixtures fixtures;
  httplib::Server server;
  std::atomic<int> failures_left{0};
  MockEntailmentClient entail;
  MockSimilarityClient similarity;
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& kind,
                 const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

StubServer::StubServer(StubFixtures fixtures) : impl_(std::make_unique<Impl>()) {
  impl_->fixtures = std::move(fixtures);
  impl_->failures_left = impl_->fixtures.fail_first();
  auto& srv = impl_->server;

  srv.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
    ++served_;
    if (impl_->failures_left.fetch_sub(1) > 0) {
      reply_error(res, 503, "Unavailable", "injected failure");
      return;
    }
    try {
      const auto request = CompletionRequest::from_json(req.body);
      res.set_content(impl_->fixtures.complete(request).to_json(), "application/json");
    } catch (const Error& e) {
      reply_error(res, e.kind() == ErrorKind::kProtocol ? 400 : 404,
                  std::string(to_string(e.kind())), e.what());
    }
  });
  srv.Post("/v1/entail", [this](const httplib::Request& req, httplib::Response& res) {
    ++served_;
    try {
      const Json j = Json::parse(req.body);
      const auto label = impl_->entail.classify(j.at("premise").get<std::string>(),
                                                j.at("hypothesis").get<std::string>());
      Json out;
      out["label"] = to_string(label);
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, "ProtocolError", e.what());
    }
  });
  srv.Post("/v1/similarity", [this](const httplib::Request& req, httplib::Response& res) {
    ++served_;
    try {
      const Json j = Json::parse(req.body);
      const auto s = impl_->similarity.score(j.at("candidate").get<std::string>(),
                                             j.at("reference").get<std::string>());
      Json out;
      out["bleurt"] = s.bl;
      out["bertscore"] = s.bs;
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, "ProtocolError", e.what());
    }
  });
}

StubServer::~StubServer() { stop(); }

int StubServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error(ErrorKind::kIo, "stub server cannot bind " + host);
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void StubServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::kIo, "stub server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StubServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace forge
