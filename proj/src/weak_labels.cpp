#include "qamine/weak_labels.hpp"

#include <algorithm>

#include "qamine/error.hpp"
#include "qamine/rng.hpp"

namespace qamine {

ThresholdResult threshold_labels(std::span<const std::pair<std::string, double>> scores,
                                 const WeakLabelConfig& cfg) {
  if (cfg.tau_low > cfg.tau_high) throw InvalidThresholds(cfg.tau_low, cfg.tau_high);
  ThresholdResult result;
  for (const auto& [qp_id, score] : scores) {
    if (score >= cfg.tau_high) {
      result.labels.push_back(WeakLabel{qp_id, score, true});
    } else if (score <= cfg.tau_low) {
      result.labels.push_back(WeakLabel{qp_id, score, false});
    } else {
      result.discarded.emplace_back(qp_id, score);
    }
  }
  return result;
}

std::vector<WeakLabel> balance_sample(std::vector<WeakLabel> labels, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i].label ? pos : neg).push_back(i);
  }
  auto& majority = pos.size() >= neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());

  Rng rng(derive_seed(seed, 0x62616c616eULL));  // "balan" stream
  // Partial Fisher-Yates: the first `keep` entries are a uniform sample.
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(majority.size() - i));
    std::swap(majority[i], majority[j]);
  }
  majority.resize(keep);

  std::vector<std::size_t> kept;
  kept.reserve(pos.size() + neg.size());
  kept.insert(kept.end(), pos.begin(), pos.end());
  kept.insert(kept.end(), neg.begin(), neg.end());
  std::sort(kept.begin(), kept.end());  // input order before the final shuffle
  rng.shuffle(kept);

  std::vector<WeakLabel> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(std::move(labels[i]));
  return out;
}

}  // namespace qamine
