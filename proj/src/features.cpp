#include "qamine/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

#include "qamine/error.hpp"
#include "qamine/io.hpp"

namespace qamine {

const std::array<std::string_view, kBehaviorFeatureCount>& behavior_feature_names() {
  static const std::array<std::string_view, kBehaviorFeatureCount> names = {
      "RFRate",          "AnswerCTR",       "AnswerOnlyCTR",        "AnswerSatCTR",
      "AnswerExpRate",   "OTAnswerCTR",     "OTAnswerOnlyCTR",      "OTAnswerSatCTR",
      "BothClickCTR",    "RelatedClickRate", "NoClickRate",         "AbandonRate",
      "AvgSourcePageDwellTime", "AvgSERPDwellTime"};
  return names;
}

double ctr(std::size_t n_click, std::size_t n_impression) {
  if (n_impression == 0) throw ZeroImpressions();
  return static_cast<double>(n_click) / static_cast<double>(n_impression);
}

double sat_ctr(std::size_t n_sat_click, std::size_t n_impression) {
  if (n_impression == 0) throw ZeroImpressions();
  return static_cast<double>(n_sat_click) / static_cast<double>(n_impression);
}

void FeatureAccumulator::add(const ImpressionSignals& s) {
  auto [it, inserted] = groups_.try_emplace(s.qp_id);
  Counters& c = it->second;
  if (inserted) c.first_seen = next_index_;
  ++next_index_;

  ++c.n;
  c.reformulated += s.reformulated;
  c.answer += s.answer_click;
  c.answer_only += s.answer_only;
  c.answer_sat += s.answer_sat_click;
  c.answer_exp += s.answer_exp_click;
  c.ot += s.ot_answer_click;
  c.ot_only += s.ot_only;
  c.ot_sat += s.ot_sat_click;
  c.both += s.both_click;
  c.related += s.related_click;
  c.no_click += s.no_click;
  c.abandoned += s.abandoned;
  if (s.source_dwell_ms) c.sum_source_dwell_ms += *s.source_dwell_ms;
  c.sum_serp_dwell_ms += s.serp_dwell_ms;
}

void FeatureAccumulator::merge(const FeatureAccumulator& other) {
  for (const auto& [qp_id, theirs] : other.groups_) {
    auto [it, inserted] = groups_.try_emplace(qp_id, theirs);
    if (inserted) continue;
    Counters& c = it->second;
    c.first_seen = std::min(c.first_seen, theirs.first_seen);
    c.n += theirs.n;
    c.reformulated += theirs.reformulated;
    c.answer += theirs.answer;
    c.answer_only += theirs.answer_only;
    c.answer_sat += theirs.answer_sat;
    c.answer_exp += theirs.answer_exp;
    c.ot += theirs.ot;
    c.ot_only += theirs.ot_only;
    c.ot_sat += theirs.ot_sat;
    c.both += theirs.both;
    c.related += theirs.related;
    c.no_click += theirs.no_click;
    c.abandoned += theirs.abandoned;
    c.sum_source_dwell_ms += theirs.sum_source_dwell_ms;
    c.sum_serp_dwell_ms += theirs.sum_serp_dwell_ms;
  }
  next_index_ = std::max(next_index_, other.next_index_);
}

AggregateResult FeatureAccumulator::emit(const AggregationConfig& cfg) const {
  std::vector<std::pair<std::size_t, const std::pair<const std::string, Counters>*>> ordered;
  ordered.reserve(groups_.size());
  for (const auto& entry : groups_) {
    ordered.emplace_back(entry.second.first_seen, &entry);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  AggregateResult result;
  for (const auto& [_, entry] : ordered) {
    const auto& [qp_id, c] = *entry;
    if (c.n < cfg.min_impressions) {
      ++result.dropped_groups;
      result.dropped_impressions += c.n;
      continue;
    }
    BehaviorFeatures f;
    f.qp_id = qp_id;
    f.n_impressions = c.n;
    const double n = static_cast<double>(c.n);
    f.values[kRfRate] = static_cast<double>(c.reformulated) / n;
    f.values[kAnswerCtr] = static_cast<double>(c.answer) / n;
    f.values[kAnswerOnlyCtr] = static_cast<double>(c.answer_only) / n;
    f.values[kAnswerSatCtr] = static_cast<double>(c.answer_sat) / n;
    f.values[kAnswerExpRate] = static_cast<double>(c.answer_exp) / n;
    f.values[kOtAnswerCtr] = static_cast<double>(c.ot) / n;
    f.values[kOtAnswerOnlyCtr] = static_cast<double>(c.ot_only) / n;
    f.values[kOtAnswerSatCtr] = static_cast<double>(c.ot_sat) / n;
    f.values[kBothClickCtr] = static_cast<double>(c.both) / n;
    f.values[kRelatedClickRate] = static_cast<double>(c.related) / n;
    f.values[kNoClickRate] = static_cast<double>(c.no_click) / n;
    f.values[kAbandonRate] = static_cast<double>(c.abandoned) / n;
    f.values[kAvgSourcePageDwellMs] =
        c.answer == 0 ? 0.0
                      : static_cast<double>(c.sum_source_dwell_ms) / static_cast<double>(c.answer);
    f.values[kAvgSerpDwellMs] = static_cast<double>(c.sum_serp_dwell_ms) / n;
    result.features.push_back(std::move(f));
  }
  return result;
}

AggregateResult aggregate(std::span<const ImpressionSignals> impressions,
                          const AggregationConfig& cfg) {
  FeatureAccumulator acc;
  for (const auto& impression : impressions) acc.add(impression);
  return acc.emit(cfg);
}

void write_features_tsv(std::ostream& out, std::span<const BehaviorFeatures> features,
                        std::span<const std::string> metadata_lines) {
  for (const auto& line : metadata_lines) out << line << '\n';
  out << "# qp_id\tn_impressions";
  for (const auto& name : behavior_feature_names()) out << '\t' << name;
  out << '\n';
  for (const auto& f : features) {
    out << f.qp_id << '\t' << f.n_impressions;
    for (double v : f.values) out << '\t' << format_fixed(v, 6);
    out << '\n';
  }
}

std::vector<BehaviorFeatures> read_features_tsv(std::span<const std::string> lines) {
  std::vector<BehaviorFeatures> features;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    BehaviorFeatures f;
    std::size_t field = 0;
    std::size_t start = 0;
    bool bad = false;
    while (start <= line.size() && field < kBehaviorFeatureCount + 2) {
      std::size_t tab = line.find('\t', start);
      std::string token = line.substr(start, tab == std::string::npos ? tab : tab - start);
      if (field == 0) {
        f.qp_id = token;
      } else {
        char* end = nullptr;
        if (field == 1) {
          f.n_impressions = static_cast<std::size_t>(std::strtoull(token.c_str(), &end, 10));
        } else {
          f.values[field - 2] = std::strtod(token.c_str(), &end);
        }
        if (end == token.c_str() || *end != '\0') {
          bad = true;
          break;
        }
      }
      ++field;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (bad || field != kBehaviorFeatureCount + 2) {
      throw IoError("features TSV line " + std::to_string(line_no) + ": expected qp_id, n_impressions and " +
                    std::to_string(kBehaviorFeatureCount) + " feature columns");
    }
    // Missing/NaN features are rejected rather than imputed.
    for (double v : f.values) {
      if (!std::isfinite(v)) {
        throw IoError("features TSV line " + std::to_string(line_no) + ": non-finite feature value");
      }
    }
    features.push_back(std::move(f));
  }
  return features;
}

}  // namespace qamine
