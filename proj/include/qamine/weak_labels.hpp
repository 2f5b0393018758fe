#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qamine {

struct WeakLabelConfig {
  double tau_high = 0.6;
  double tau_low = 0.4;
  bool balance = true;
  std::uint64_t seed = 0;
};

struct WeakLabel {
  std::string qp_id;
  double score = 0.0;
  bool label = false;
};

struct ThresholdResult {
  std::vector<WeakLabel> labels;
  std::vector<std::pair<std::string, double>> discarded;
};

/// score >= tau_high -> 1; score <= tau_low -> 0; strictly inside the band ->
/// discarded. Throws InvalidThresholds when tau_low > tau_high.
ThresholdResult threshold_labels(std::span<const std::pair<std::string, double>> scores,
                                 const WeakLabelConfig& cfg);

/// Downsamples the majority class uniformly without replacement so class
/// counts differ by at most one, then shuffles; fully determined by seed.
std::vector<WeakLabel> balance_sample(std::vector<WeakLabel> labels, std::uint64_t seed);

}  // namespace qamine
