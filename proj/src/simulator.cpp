#include "qamine/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qamine/error.hpp"
#include "qamine/rng.hpp"

namespace qamine {

namespace {

constexpr std::uint64_t kPairStream = 0x70616972ULL;   // "pair"
constexpr std::uint64_t kSessStream = 0x73657373ULL;   // "sess"
constexpr std::uint64_t kGoldStream = 0x676f6c64ULL;   // "gold"
constexpr std::int64_t kSerpLatencyMs = 120;

std::uint64_t pair_seed(std::uint64_t master, std::uint64_t stream, std::size_t index) {
  return derive_seed(derive_seed(master, stream), index);
}

std::string qp_id_of(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "qp%06zu", index);
  return std::string(buf);
}

/// Zipf-weighted vocabulary sampler over tokens "w0".."w{V-1}".
class Vocabulary {
 public:
  Vocabulary(std::size_t size, double exponent) {
    cumulative_.reserve(size);
    double total = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      total += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cumulative_.push_back(total);
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform01() * cumulative_.back();
    return static_cast<std::size_t>(
        std::lower_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
  }

  static std::string token(std::size_t index) { return "w" + std::to_string(index); }

 private:
  std::vector<double> cumulative_;
};

enum class Pattern { kNoClick, kAnswerOnly, kOtOnly, kBoth, kOtherOnly };

Pattern draw_pattern(Rng& rng, const BehaviorProfile& profile) {
  const double u = rng.uniform01();
  double acc = profile.p_no_click;
  if (u < acc) return Pattern::kNoClick;
  acc += profile.p_answer_only;
  if (u < acc) return Pattern::kAnswerOnly;
  acc += profile.p_ot_only;
  if (u < acc) return Pattern::kOtOnly;
  acc += profile.p_both;
  if (u < acc) return Pattern::kBoth;
  return Pattern::kOtherOnly;
}

std::int64_t draw_ms(Rng& rng, double log_mu, double log_sigma) {
  return std::max<std::int64_t>(1, std::llround(rng.lognormal(log_mu, log_sigma)));
}

void append_event(std::vector<std::string>& lines, const std::string& session_id,
                  std::int64_t ts, const char* kind, const char* field,
                  const std::string& value) {
  std::string line = "{\"session\":\"" + session_id + "\",\"ts\":" + std::to_string(ts) +
                     ",\"kind\":\"" + kind + "\",\"" + field + "\":\"" + value + "\"}";
  lines.push_back(std::move(line));
}

/// Emits the events of one impression starting at query time t0; returns the
/// timestamp after the impression's last event.
std::int64_t emit_impression(std::vector<std::string>& lines, const std::string& session_id,
                             std::int64_t t0, const SimPair& sim_pair, const SimConfig& cfg,
                             Rng& rng) {
  const BehaviorProfile& base = sim_pair.truth ? cfg.relevant : cfg.irrelevant;
  const BehaviorProfile& profile =
      rng.bernoulli(base.behavior_noise) ? (sim_pair.truth ? cfg.irrelevant : cfg.relevant) : base;

  append_event(lines, session_id, t0, "query", "text", sim_pair.pair.question);
  const std::int64_t serp_ts = t0 + kSerpLatencyMs;
  append_event(lines, session_id, serp_ts, "serp", "qp", sim_pair.pair.qp_id);

  const Pattern pattern = draw_pattern(rng, profile);
  const std::int64_t browse = draw_ms(rng, profile.serp_dwell_log_mu, profile.serp_dwell_log_sigma);

  std::int64_t last_ts = serp_ts;
  bool satisfied = false;
  std::int64_t reformulate_ts = 0;

  // Add-on expansion/related clicks land during the browse, before the main
  // click, so they never sit between a click and its dwell-closing event.
  if (pattern != Pattern::kNoClick) {
    if (rng.bernoulli(profile.p_answer_expansion)) {
      append_event(lines, session_id, serp_ts + std::max<std::int64_t>(1, browse / 3), "click",
                   "target", "answer_expansion");
    }
    if (rng.bernoulli(profile.p_related_click)) {
      append_event(lines, session_id, serp_ts + std::max<std::int64_t>(1, 2 * browse / 3), "click",
                   "target", "related");
    }
  }

  switch (pattern) {
    case Pattern::kNoClick: {
      satisfied = browse >= cfg.sat_threshold_ms;
      reformulate_ts = serp_ts + browse;
      break;
    }
    case Pattern::kAnswerOnly: {
      const std::int64_t click_ts = serp_ts + browse;
      append_event(lines, session_id, click_ts, "click", "target", "answer");
      const std::int64_t dwell =
          draw_ms(rng, profile.source_dwell_log_mu, profile.source_dwell_log_sigma);
      satisfied = dwell >= cfg.sat_threshold_ms;
      last_ts = click_ts;
      reformulate_ts = click_ts + dwell;
      break;
    }
    case Pattern::kOtOnly: {
      const std::int64_t click_ts = serp_ts + browse;
      append_event(lines, session_id, click_ts, "click", "target", "outside_answer");
      const std::int64_t dwell =
          draw_ms(rng, profile.source_dwell_log_mu, profile.source_dwell_log_sigma);
      satisfied = dwell >= cfg.sat_threshold_ms;
      last_ts = click_ts;
      reformulate_ts = click_ts + dwell;
      break;
    }
    case Pattern::kBoth: {
      const std::int64_t ot_ts = serp_ts + browse;
      append_event(lines, session_id, ot_ts, "click", "target", "outside_answer");
      const std::int64_t ot_dwell =
          draw_ms(rng, profile.source_dwell_log_mu, profile.source_dwell_log_sigma);
      const std::int64_t answer_ts = ot_ts + ot_dwell;
      append_event(lines, session_id, answer_ts, "click", "target", "answer");
      const std::int64_t answer_dwell =
          draw_ms(rng, profile.source_dwell_log_mu, profile.source_dwell_log_sigma);
      satisfied = answer_dwell >= cfg.sat_threshold_ms;
      last_ts = answer_ts;
      reformulate_ts = answer_ts + answer_dwell;
      break;
    }
    case Pattern::kOtherOnly: {
      const std::int64_t click_ts = serp_ts + browse;
      const double p_sum = profile.p_answer_expansion + profile.p_related_click;
      const bool expansion =
          p_sum <= 0.0 ? true : rng.uniform01() * p_sum < profile.p_answer_expansion;
      append_event(lines, session_id, click_ts, "click", "target",
                   expansion ? "answer_expansion" : "related");
      satisfied = false;
      last_ts = click_ts;
      reformulate_ts =
          click_ts + draw_ms(rng, profile.serp_dwell_log_mu, profile.serp_dwell_log_sigma);
      break;
    }
  }

  if (!satisfied && rng.bernoulli(profile.p_reformulate_given_no_sat)) {
    append_event(lines, session_id, reformulate_ts, "query", "text", sim_pair.pair.question);
    return reformulate_ts;
  }
  return std::max(last_ts, serp_ts);
}

}  // namespace

void BehaviorProfile::validate() const {
  const double probs[] = {p_no_click,       p_answer_only,    p_ot_only,
                          p_both,           p_other_only,     p_reformulate_given_no_sat,
                          p_related_click,  p_answer_expansion, behavior_noise};
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("profile probability outside [0, 1]");
  }
  const double sum = p_no_click + p_answer_only + p_ot_only + p_both + p_other_only;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("pattern probabilities must sum to 1, got " + std::to_string(sum));
  }
  if (serp_dwell_log_sigma <= 0.0 || source_dwell_log_sigma <= 0.0) {
    throw ConfigError("dwell log-sigma must be positive");
  }
}

void SimConfig::validate() const {
  if (positive_rate < 0.0 || positive_rate > 1.0) throw ConfigError("positive_rate outside [0, 1]");
  if (impressions_per_pair <= 0.0) throw ConfigError("impressions_per_pair must be positive");
  if (!(judge_error_rate >= 0.0 && judge_error_rate < 0.5)) {
    throw ConfigError("judge_error_rate must be in [0, 0.5)");
  }
  if (n_judges == 0 || n_judges % 2 == 0) throw ConfigError("n_judges must be odd");
  if (vocab_size < 16) throw ConfigError("vocab_size too small");
  if (filler_min == 0 || filler_max < filler_min) throw ConfigError("bad filler range");
  if (sat_threshold_ms <= 0) throw ConfigError("sat_threshold_ms must be positive");
  relevant.validate();
  irrelevant.validate();
}

BehaviorProfile default_relevant_profile() {
  BehaviorProfile p;
  p.p_no_click = 0.550;
  p.p_answer_only = 0.007;
  p.p_ot_only = 0.120;
  p.p_both = 0.001;
  p.p_other_only = 0.322;
  p.p_reformulate_given_no_sat = 0.10;
  p.p_related_click = 0.04;
  p.p_answer_expansion = 0.12;
  p.serp_dwell_log_mu = std::log(40000.0);
  p.serp_dwell_log_sigma = 0.55;
  p.source_dwell_log_mu = std::log(45000.0);
  p.source_dwell_log_sigma = 0.60;
  p.behavior_noise = 0.25;
  return p;
}

BehaviorProfile default_irrelevant_profile() {
  BehaviorProfile p;
  p.p_no_click = 0.220;
  p.p_answer_only = 0.003;
  p.p_ot_only = 0.450;
  p.p_both = 0.011;
  p.p_other_only = 0.316;
  p.p_reformulate_given_no_sat = 0.55;
  p.p_related_click = 0.18;
  p.p_answer_expansion = 0.05;
  p.serp_dwell_log_mu = std::log(8000.0);
  p.serp_dwell_log_sigma = 0.60;
  p.source_dwell_log_mu = std::log(9000.0);
  p.source_dwell_log_sigma = 0.70;
  p.behavior_noise = 0.25;
  return p;
}

std::vector<SimPair> gen_pairs(const SimConfig& cfg) {
  cfg.validate();
  const Vocabulary vocab(cfg.vocab_size, cfg.zipf_exponent);
  std::vector<SimPair> pairs;
  pairs.reserve(cfg.n_pairs);

  for (std::size_t i = 0; i < cfg.n_pairs; ++i) {
    Rng rng(pair_seed(cfg.seed, kPairStream, i));
    SimPair sim_pair;
    sim_pair.truth = rng.bernoulli(cfg.positive_rate);
    sim_pair.pair.qp_id = qp_id_of(i);

    const std::size_t q_len = static_cast<std::size_t>(rng.uniform_int(3, 8));
    std::vector<std::string> q_tokens;
    q_tokens.reserve(q_len);
    for (std::size_t t = 0; t < q_len; ++t) q_tokens.push_back(Vocabulary::token(vocab.draw(rng)));

    std::vector<std::string> distinct;
    for (const auto& token : q_tokens) {
      if (std::find(distinct.begin(), distinct.end(), token) == distinct.end()) {
        distinct.push_back(token);
      }
    }

    // Embedded fraction of distinct question tokens: >= 0.7 for relevant,
    // <= 0.2 for irrelevant; fillers may add accidental overlap on top.
    const double fraction = sim_pair.truth ? 0.7 + 0.3 * rng.uniform01() : 0.2 * rng.uniform01();
    const std::size_t n_embed =
        sim_pair.truth
            ? static_cast<std::size_t>(
                  std::ceil(fraction * static_cast<double>(distinct.size())))
            : static_cast<std::size_t>(
                  std::floor(fraction * static_cast<double>(distinct.size())));

    std::vector<std::string> embedded;
    if (n_embed > 0) {
      auto picks = rng.sample_indices(distinct.size(), n_embed);
      std::sort(picks.begin(), picks.end());  // keep question order
      for (std::size_t k : picks) embedded.push_back(distinct[k]);
    }

    const std::size_t n_fillers =
        cfg.filler_min + static_cast<std::size_t>(rng.uniform_below(cfg.filler_max - cfg.filler_min + 1));
    std::vector<std::string> p_tokens;
    p_tokens.reserve(n_fillers + embedded.size());
    for (std::size_t t = 0; t < n_fillers; ++t) p_tokens.push_back(Vocabulary::token(vocab.draw(rng)));
    const std::size_t insert_at =
        static_cast<std::size_t>(rng.uniform_below(p_tokens.size() + 1));
    p_tokens.insert(p_tokens.begin() + static_cast<std::ptrdiff_t>(insert_at), embedded.begin(),
                    embedded.end());

    std::string question;
    for (const auto& token : q_tokens) {
      if (!question.empty()) question += ' ';
      question += token;
    }
    std::string passage;
    for (const auto& token : p_tokens) {
      if (!passage.empty()) passage += ' ';
      passage += token;
    }
    sim_pair.pair.question = std::move(question);
    sim_pair.pair.passage = std::move(passage);
    pairs.push_back(std::move(sim_pair));
  }
  return pairs;
}

void for_each_pair_sessions(std::span<const SimPair> pairs, const SimConfig& cfg,
                            const std::function<void(std::size_t, std::vector<std::string>&)>& sink) {
  cfg.validate();
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    lines.clear();
    Rng rng(pair_seed(cfg.seed, kSessStream, i));
    const std::size_t n_impressions = static_cast<std::size_t>(rng.poisson(cfg.impressions_per_pair));
    std::size_t imp = 0;
    std::size_t session_no = 0;
    while (imp < n_impressions) {
      const std::size_t in_session =
          cfg.multi_impression ? std::min<std::size_t>(1 + rng.uniform_below(3), n_impressions - imp)
                               : 1;
      const std::string session_id =
          "s" + std::to_string(i) + "-" + std::to_string(session_no++);
      std::int64_t t = 0;
      for (std::size_t k = 0; k < in_session; ++k) {
        t = emit_impression(lines, session_id, t, pairs[i], cfg, rng) + 1500;
        ++imp;
      }
    }
    sink(i, lines);
  }
}

std::vector<std::string> gen_sessions(std::span<const SimPair> pairs, const SimConfig& cfg) {
  std::vector<std::string> all;
  for_each_pair_sessions(pairs, cfg, [&all](std::size_t, std::vector<std::string>& lines) {
    all.insert(all.end(), std::make_move_iterator(lines.begin()),
               std::make_move_iterator(lines.end()));
  });
  return all;
}

bool majority_vote(std::span<const bool> judge_labels) {
  if (judge_labels.empty() || judge_labels.size() % 2 == 0) throw EvenPanel(judge_labels.size());
  std::size_t positives = 0;
  for (bool label : judge_labels) positives += label;
  return positives * 2 > judge_labels.size();
}

std::vector<std::pair<std::string, bool>> gen_gold_labels(std::span<const SimPair> pairs,
                                                          const SimConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, bool>> gold;
  gold.reserve(pairs.size());
  std::vector<bool> votes(cfg.n_judges);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Rng rng(pair_seed(cfg.seed, kGoldStream, i));
    for (std::size_t j = 0; j < cfg.n_judges; ++j) {
      const bool flip = rng.bernoulli(cfg.judge_error_rate);
      votes[j] = flip ? !pairs[i].truth : pairs[i].truth;
    }
    gold.emplace_back(pairs[i].pair.qp_id, majority_vote(votes));
  }
  return gold;
}

}  // namespace qamine
