#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qamine/qa_model.hpp"

namespace qamine {

/// Per-relevance-class behavior generator. The five pattern probabilities
/// are exclusive per impression and must sum to 1; dwell parameters are
/// log-space over milliseconds. All values are calibration choices frozen in
/// the committed default config, not measured facts.
struct BehaviorProfile {
  double p_no_click = 0.0;
  double p_answer_only = 0.0;
  double p_ot_only = 0.0;
  double p_both = 0.0;
  double p_other_only = 0.0;
  double p_reformulate_given_no_sat = 0.0;
  double p_related_click = 0.0;
  double p_answer_expansion = 0.0;
  double serp_dwell_log_mu = 0.0;
  double serp_dwell_log_sigma = 1.0;
  double source_dwell_log_mu = 0.0;
  double source_dwell_log_sigma = 1.0;
  double behavior_noise = 0.0;  // probability an impression uses the opposite profile

  void validate() const;  // throws ConfigError on bad probabilities
};

BehaviorProfile default_relevant_profile();
BehaviorProfile default_irrelevant_profile();

struct SimConfig {
  std::size_t n_pairs = 5000;
  double positive_rate = 0.5;
  double impressions_per_pair = 50.0;  // Poisson mean
  double judge_error_rate = 0.1;
  std::size_t n_judges = 3;
  std::size_t vocab_size = 250;
  double zipf_exponent = 1.15;
  std::size_t filler_min = 12;
  std::size_t filler_max = 30;
  std::int64_t sat_threshold_ms = 30000;
  bool multi_impression = false;
  std::uint64_t seed = 7;
  BehaviorProfile relevant = default_relevant_profile();
  BehaviorProfile irrelevant = default_irrelevant_profile();

  void validate() const;
};

struct SimPair {
  QAPair pair;
  bool truth = false;
};

/// Questions are 3-8 vocabulary tokens; a relevant passage embeds >= 70% of
/// the distinct question tokens (contiguously, in question order), an
/// irrelevant one <= 20%; fillers are Zipf draws from the same vocabulary.
/// Deterministic by seed, independent per pair.
std::vector<SimPair> gen_pairs(const SimConfig& cfg);

/// JSON Lines event log: Poisson(impressions_per_pair) single-impression
/// sessions per pair, behavior drawn from the class profile with flip
/// probability behavior_noise. Line order is fixed by pair then impression.
std::vector<std::string> gen_sessions(std::span<const SimPair> pairs, const SimConfig& cfg);

/// Streaming variant: calls sink(pair_index, lines) once per pair, in order.
void for_each_pair_sessions(std::span<const SimPair> pairs, const SimConfig& cfg,
                            const std::function<void(std::size_t, std::vector<std::string>&)>& sink);

/// Majority value of an odd panel.
bool majority_vote(std::span<const bool> judge_labels);

/// Each judge flips the truth independently with probability
/// judge_error_rate; the gold label is the majority vote.
std::vector<std::pair<std::string, bool>> gen_gold_labels(std::span<const SimPair> pairs,
                                                          const SimConfig& cfg);

}  // namespace qamine
