#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "forge/preference.hpp"
#include "forge/records.hpp"

namespace forge {

enum class SweepAxis { kAlpha3, kThreshold };

std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepLabel {
  std::string instance_id;
  int slot = 0;
  double total = 0.0;
};

struct SweepRow {
  double value = 0.0;
  CompositeWeights weights;
  double threshold = 0.0;
  std::size_t n_preferred = 0;
  std::size_t n_dispreferred = 0;
  std::size_t n_pairs = 0;
  std::size_t n_skipped = 0;
  std::vector<SweepLabel> labels;  // SFT label per instance, ids ascending
};

struct SweepReport {
  SweepAxis axis = SweepAxis::kAlpha3;
  std::vector<SweepRow> rows;  // grid order

  std::string to_json() const;
};

// Re-weights stored category terms at every grid point and re-derives
// rankings, SFT labels, partitions and pair counts. Never generates or
// re-scores. Throws Error(kEmptyGrid).
SweepReport sensitivity_sweep(SweepAxis axis, const std::vector<double>& grid,
                              const CompositeWeights& weights, const PairingOptions& pairing,
                              const std::vector<ScoreRecord>& records);

}  // namespace forge
