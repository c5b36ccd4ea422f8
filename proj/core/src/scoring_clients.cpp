#include <algorithm>
#include <set>

#include "forge/error.hpp"
#include "forge/scoring.hpp"
#include "forge/text.hpp"
#include "json_util.hpp"

namespace forge {

std::string_view to_string(EntailmentLabel label) {
  switch (label) {
    case EntailmentLabel::kEntailment: return "entailment";
    case EntailmentLabel::kNeutral: return "neutral";
    case EntailmentLabel::kContradiction: return "contradiction";
  }
  return "neutral";
}

EntailmentLabel parse_entailment_label(std::string_view text) {
  const std::string lower = to_lower(text);
  if (lower == "entailment") return EntailmentLabel::kEntailment;
  if (lower == "neutral") return EntailmentLabel::kNeutral;
  if (lower == "contradiction") return EntailmentLabel::kContradiction;
  throw Error(ErrorKind::kProtocol, "unknown entailment label '" + std::string(text) + "'");
}

namespace {

bool is_negation(const std::string& token) {
  return token == "not" || token == "no" || token == "never";
}

std::set<std::string> token_set(std::string_view text) {
  const Tokens tokens = tokenize(text);
  return {tokens.begin(), tokens.end()};
}

}  // namespace

EntailmentLabel MockEntailmentClient::classify(std::string_view premise,
                                               std::string_view hypothesis) {
  const std::set<std::string> in_premise = token_set(premise);
  const Tokens hyp = tokenize(hypothesis);
  const auto covered = [&](const std::string& t) { return in_premise.count(t) > 0; };
  if (std::all_of(hyp.begin(), hyp.end(), covered)) return EntailmentLabel::kEntailment;

  const bool negated = std::any_of(hyp.begin(), hyp.end(), is_negation);
  if (negated && std::all_of(hyp.begin(), hyp.end(), [&](const std::string& t) {
        return is_negation(t) || covered(t);
      })) {
    return EntailmentLabel::kContradiction;
  }
  return EntailmentLabel::kNeutral;
}

SimilarityScores MockSimilarityClient::score(std::string_view candidate,
                                             std::string_view reference) {
  const auto a = token_set(candidate);
  const auto b = token_set(reference);
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  const double j = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return {j, j};
}

HttpEntailmentClient::HttpEntailmentClient(std::string base_url, RetryPolicy retry)
    : http_(std::move(base_url), retry) {}

EntailmentLabel HttpEntailmentClient::classify(std::string_view premise,
                                               std::string_view hypothesis) {
  Json req;
  req["premise"] = premise;
  req["hypothesis"] = hypothesis;
  std::string body;
  try {
    body = http_.post("/v1/entail", req.dump());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEndpointUnavailable) throw;
    throw Error(ErrorKind::kClient, e.what());
  }
  try {
    const Json res = Json::parse(body);
    return parse_entailment_label(res.at("label").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed entailment response: ") + e.what());
  }
}

HttpSimilarityClient::HttpSimilarityClient(std::string base_url, RetryPolicy retry)
    : http_(std::move(base_url), retry) {}

SimilarityScores HttpSimilarityClient::score(std::string_view candidate,
                                             std::string_view reference) {
  Json req;
  req["candidate"] = candidate;
  req["reference"] = reference;
  std::string body;
  try {
    body = http_.post("/v1/similarity", req.dump());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEndpointUnavailable) throw;
    throw Error(ErrorKind::kClient, e.what());
  }
  try {
    const Json res = Json::parse(body);
    SimilarityScores s{res.at("bleurt").get<double>(), res.at("bertscore").get<double>()};
    if (!std::isfinite(s.bl) || !(s.bs >= 0.0 && s.bs <= 1.0)) {
      throw Error(ErrorKind::kProtocol, "similarity scores out of range");
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kProtocol, std::string("malformed similarity response: ") + e.what());
  }
}

ScoringClients ScoringClients::mock() {
  return {std::make_shared<MockSimilarityClient>(), std::make_shared<MockEntailmentClient>()};
}

ScoringClients ScoringClients::from_urls(const std::string& similarity_url,
                                         const std::string& entailment_url,
                                         RetryPolicy retry) {
  ScoringClients c;
  if (similarity_url.empty() || similarity_url == "mock") {
    c.similarity = std::make_shared<MockSimilarityClient>();
  } else {
    c.similarity = std::make_shared<HttpSimilarityClient>(similarity_url, retry);
  }
  if (entailment_url.empty() || entailment_url == "mock") {
    c.entailment = std::make_shared<MockEntailmentClient>();
  } else {
    c.entailment = std::make_shared<HttpEntailmentClient>(entailment_url, retry);
  }
  return c;
}

}  // namespace forge
