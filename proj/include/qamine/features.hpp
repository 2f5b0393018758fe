#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qamine/session.hpp"

namespace qamine {

inline constexpr std::string_view kBehaviorOrderVersion = "behavior-features-v1";
inline constexpr std::size_t kBehaviorFeatureCount = 14;

/// Fixed index order; this is the serialization and model-input contract.
enum BehaviorFeatureIndex : std::size_t {
  kRfRate = 0,
  kAnswerCtr = 1,
  kAnswerOnlyCtr = 2,
  kAnswerSatCtr = 3,
  kAnswerExpRate = 4,
  kOtAnswerCtr = 5,
  kOtAnswerOnlyCtr = 6,
  kOtAnswerSatCtr = 7,
  kBothClickCtr = 8,
  kRelatedClickRate = 9,
  kNoClickRate = 10,
  kAbandonRate = 11,
  kAvgSourcePageDwellMs = 12,
  kAvgSerpDwellMs = 13,
};

const std::array<std::string_view, kBehaviorFeatureCount>& behavior_feature_names();

/// Aggregated user-behavior features for one question-passage pair.
/// Indices 0-11 are fractions in [0,1]; 12-13 are mean dwells in ms.
struct BehaviorFeatures {
  std::string qp_id;
  std::size_t n_impressions = 0;
  std::array<double, kBehaviorFeatureCount> values{};
};

struct AggregationConfig {
  std::int64_t sat_threshold_ms = 30000;
  std::size_t min_impressions = 10;
};

/// Click-through rate. Requires n_impression > 0.
double ctr(std::size_t n_click, std::size_t n_impression);

/// Satisfied click-through rate. Requires n_impression > 0.
double sat_ctr(std::size_t n_sat_click, std::size_t n_impression);

struct AggregateResult {
  std::vector<BehaviorFeatures> features;
  std::size_t dropped_groups = 0;
  std::size_t dropped_impressions = 0;
};

/// Mergeable per-pair counters. Counters stay exact integers; division
/// happens once at emit, so sharded aggregation merged by summing is
/// bit-identical to a single pass. Emission order is by the smallest input
/// position seen for each qp_id; shards must be constructed with their
/// global start offset for that to line up.
class FeatureAccumulator {
 public:
  explicit FeatureAccumulator(std::size_t start_offset = 0) : next_index_(start_offset) {}

  void add(const ImpressionSignals& impression);
  void merge(const FeatureAccumulator& other);
  AggregateResult emit(const AggregationConfig& cfg) const;

 private:
  struct Counters {
    std::size_t first_seen = 0;
    std::size_t n = 0;
    std::size_t reformulated = 0;
    std::size_t answer = 0;
    std::size_t answer_only = 0;
    std::size_t answer_sat = 0;
    std::size_t answer_exp = 0;
    std::size_t ot = 0;
    std::size_t ot_only = 0;
    std::size_t ot_sat = 0;
    std::size_t both = 0;
    std::size_t related = 0;
    std::size_t no_click = 0;
    std::size_t abandoned = 0;
    std::int64_t sum_source_dwell_ms = 0;
    std::int64_t sum_serp_dwell_ms = 0;
  };

  std::map<std::string, Counters> groups_;
  std::size_t next_index_ = 0;
};

/// Single-pass convenience over a flat impression sequence.
AggregateResult aggregate(std::span<const ImpressionSignals> impressions,
                          const AggregationConfig& cfg);

/// TSV: header naming the features in index order, then one row per pair
/// with rates printed with 6 fractional digits.
void write_features_tsv(std::ostream& out, std::span<const BehaviorFeatures> features,
                        std::span<const std::string> metadata_lines);
std::vector<BehaviorFeatures> read_features_tsv(std::span<const std::string> lines);

}  // namespace qamine
