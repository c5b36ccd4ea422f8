#include "forge/preference.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "json_util.hpp"

namespace forge {

std::string_view to_string(PairingStrategy strategy) {
  switch (strategy) {
    case PairingStrategy::kCrossProduct: return "cross_product";
    case PairingStrategy::kBestVsWorst: return "best_vs_worst";
    case PairingStrategy::kBestVsAll: return "best_vs_all";
  }
  return "cross_product";
}

PairingStrategy parse_pairing_strategy(std::string_view name) {
  if (name == "cross_product") return PairingStrategy::kCrossProduct;
  if (name == "best_vs_worst") return PairingStrategy::kBestVsWorst;
  if (name == "best_vs_all") return PairingStrategy::kBestVsAll;
  throw Error(ErrorKind::kInvalidArgument, "unknown pairing strategy '" + std::string(name) + "'");
}

std::vector<ScoredResponse> rank_responses(std::vector<ScoredResponse> scored) {
  if (scored.empty()) throw Error(ErrorKind::kEmptyInput, "nothing to rank");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredResponse& a, const ScoredResponse& b) {
                     if (a.total() != b.total()) return a.total() > b.total();
                     if (a.text != b.text) return a.text < b.text;
                     return a.slot < b.slot;
                   });
  return scored;
}

Partition split_by_threshold(const std::vector<ScoredResponse>& sorted, double threshold) {
  Partition p;
  for (const auto& r : sorted) {
    (r.total() >= threshold ? p.preferred : p.dispreferred).push_back(r);
  }
  return p;
}

namespace {

void emit(std::vector<PreferencePair>& out, const ScoredResponse& w, const ScoredResponse& l,
          std::string_view question) {
  if (w.text == l.text || !(w.total() > l.total())) return;
  out.push_back({w.instance_id, std::string(question), {w.text, w.total()},
                 {l.text, l.total()}});
}

}  // namespace

std::vector<PreferencePair> build_pairs(const std::vector<ScoredResponse>& preferred,
                                        const std::vector<ScoredResponse>& dispreferred,
                                        PairingStrategy strategy, std::string_view question) {
  std::vector<PreferencePair> pairs;
  if (preferred.empty() || dispreferred.empty()) return pairs;
  switch (strategy) {
    case PairingStrategy::kCrossProduct:
      for (const auto& w : preferred) {
        for (const auto& l : dispreferred) emit(pairs, w, l, question);
      }
      break;
    case PairingStrategy::kBestVsWorst:
      emit(pairs, preferred.front(), dispreferred.back(), question);
      break;
    case PairingStrategy::kBestVsAll:
      for (const auto& l : dispreferred) emit(pairs, preferred.front(), l, question);
      break;
  }
  return pairs;
}

SftExample select_sft_label(const std::vector<ScoredResponse>& sorted,
                            std::string_view question) {
  if (sorted.empty()) throw Error(ErrorKind::kEmptyInput, "no responses to select a label from");
  const auto& best = sorted.front();
  return {best.instance_id, std::string(question), best.text, best.total()};
}

InstancePairing pair_instance(const std::vector<ScoredResponse>& responses,
                              std::string_view question, const PairingOptions& options) {
  InstancePairing out;
  const auto ranked = rank_responses(responses);
  const Partition part = split_by_threshold(ranked, options.threshold);
  out.n_preferred = part.preferred.size();
  out.n_dispreferred = part.dispreferred.size();
  if (part.preferred.empty() || part.dispreferred.empty()) {
    if (options.fallback_best_vs_worst) {
      out.pairs = build_pairs({ranked.front()}, {ranked.back()},
                              PairingStrategy::kBestVsWorst, question);
    }
    if (out.pairs.empty()) {
      out.skip_reason = part.preferred.empty() ? "all responses below threshold"
                                               : "all responses at or above threshold";
    }
    return out;
  }
  out.pairs = build_pairs(part.preferred, part.dispreferred, options.strategy, question);
  if (out.pairs.empty()) out.skip_reason = "no distinct pairs";
  return out;
}

namespace {

std::string finish_export(const std::string& bytes, const std::filesystem::path& path) {
  if (!path.parent_path().empty() && !std::filesystem::is_directory(path.parent_path())) {
    throw Error(ErrorKind::kIo, "directory does not exist: " + path.parent_path().string());
  }
  write_file_atomic(path, bytes);
  const std::string digest = sha256_hex(bytes);
  auto sidecar = path;
  sidecar += ".sha256";
  write_file_atomic(sidecar, digest + "\n");
  return digest;
}

}  // namespace

std::string export_sft(std::vector<SftExample> examples, const std::filesystem::path& path) {
  if (examples.empty()) spdlog::warn("exporting an empty SFT file to {}", path.string());
  std::stable_sort(examples.begin(), examples.end(),
                   [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
  std::string bytes;
  for (const auto& e : examples) {
    Json j;
    j["id"] = e.instance_id;
    j["question"] = e.question;
    j["label"] = e.label;
    bytes += j.dump();
    bytes += '\n';
  }
  return finish_export(bytes, path);
}

std::string export_dpo(std::vector<PreferencePair> pairs, const std::filesystem::path& path) {
  if (pairs.empty()) spdlog::warn("exporting an empty DPO file to {}", path.string());
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
  std::string bytes;
  for (const auto& p : pairs) {
    Json j;
    j["id"] = p.instance_id;
    j["question"] = p.question;
    j["chosen"] = p.chosen.text;
    j["rejected"] = p.rejected.text;
    j["chosen_score"] = p.chosen.total;
    j["rejected_score"] = p.rejected.total;
    bytes += j.dump();
    bytes += '\n';
  }
  return finish_export(bytes, path);
}

std::vector<PreferencePair> load_dpo(const std::filesystem::path& path) {
  std::vector<PreferencePair> pairs;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const Json j = Json::parse(lines[i]);
      pairs.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                       {j.at("chosen").get<std::string>(), j.value("chosen_score", 0.0)},
                       {j.at("rejected").get<std::string>(), j.value("rejected_score", 0.0)}});
    } catch (const Json::exception& e) {
      throw SchemaError(i + 1, "<dpo>", e.what());
    }
  }
  return pairs;
}

}  // namespace forge
