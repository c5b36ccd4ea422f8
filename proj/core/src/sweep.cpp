#include "forge/sweep.hpp"

#include "forge/error.hpp"
#include "json_util.hpp"

namespace forge {

std::string_view to_string(SweepAxis axis) {
  return axis == SweepAxis::kAlpha3 ? "alpha3" : "threshold";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "alpha3") return SweepAxis::kAlpha3;
  if (name == "threshold") return SweepAxis::kThreshold;
  throw Error(ErrorKind::kInvalidArgument, "unknown sweep axis '" + std::string(name) + "'");
}

SweepReport sensitivity_sweep(SweepAxis axis, const std::vector<double>& grid,
                              const CompositeWeights& weights, const PairingOptions& pairing,
                              const std::vector<ScoreRecord>& records) {
  if (grid.empty()) throw Error(ErrorKind::kEmptyGrid, "sweep grid is empty");
  const auto groups = group_by_instance(records);
  SweepReport report;
  report.axis = axis;
  for (double value : grid) {
    SweepRow row;
    row.value = value;
    row.weights = weights;
    PairingOptions opts = pairing;
    if (axis == SweepAxis::kAlpha3) {
      row.weights.alpha3 = value;
    } else {
      opts.threshold = value;
    }
    row.weights.validate();
    row.threshold = opts.threshold;

    for (const auto& group : groups) {
      std::vector<ScoredResponse> responses;
      for (const auto& r : group) {
        ScoredResponse s = r.response;
        s.report.terms = reweight(s.report.terms, row.weights);
        responses.push_back(std::move(s));
      }
      const auto ranked = rank_responses(responses);
      const SftExample label = select_sft_label(ranked);
      row.labels.push_back({label.instance_id, ranked.front().slot, label.total});
      const InstancePairing ip = pair_instance(responses, group.front().question, opts);
      row.n_preferred += ip.n_preferred;
      row.n_dispreferred += ip.n_dispreferred;
      row.n_pairs += ip.pairs.size();
      row.n_skipped += ip.skip_reason.empty() ? 0 : 1;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string SweepReport::to_json() const {
  Json j;
  j["axis"] = std::string(to_string(axis));
  j["rows"] = Json::array();
  for (const auto& r : rows) {
    Json row;
    row["value"] = r.value;
    row["alpha"] = {r.weights.alpha1, r.weights.alpha2, r.weights.alpha3};
    row["threshold"] = r.threshold;
    row["preferred"] = r.n_preferred;
    row["dispreferred"] = r.n_dispreferred;
    row["pairs"] = r.n_pairs;
    row["skipped"] = r.n_skipped;
    Json labels = Json::array();
    for (const auto& l : r.labels) {
      labels.push_back({{"id", l.instance_id}, {"slot", l.slot}, {"total", l.total}});
    }
    row["labels"] = std::move(labels);
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace forge
