#include "qamine/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "qamine/error.hpp"
#include "qamine/rng.hpp"
#include "qamine/session.hpp"

namespace qamine {

namespace {

constexpr std::uint64_t kSimStream = 0x73696dULL;        // "sim"
constexpr std::uint64_t kWeakPoolStream = 0x776b706cULL; // "wkpl"
constexpr std::uint64_t kFeedbackStream = 0x66656564ULL; // "feed"
constexpr std::uint64_t kWeakStream = 0x7765616bULL;     // "weak"
constexpr std::uint64_t kQaStream = 0x7161ULL;           // "qa"

std::vector<std::string> meta_lines(const std::string& stage, std::uint64_t seed,
                                    const std::vector<std::filesystem::path>& inputs) {
  StageMetadata meta;
  meta.stage = stage;
  meta.seed = seed;
  for (const auto& input : inputs) meta.add_input(input);
  return meta.header_lines();
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    out += line;
    out += '\n';
  }
  write_file(path, out);
}

std::map<std::string, bool> read_label_tsv(const std::filesystem::path& path) {
  std::map<std::string, bool> labels;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path.string() + " line " + std::to_string(line_no) + ": expected qp_id<TAB>label");
    }
    const std::string value = line.substr(tab + 1);
    if (value != "0" && value != "1") {
      throw IoError(path.string() + " line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    labels[line.substr(0, tab)] = value == "1";
  }
  return labels;
}

BehaviorProfile profile_from_config(const KeyValueConfig& kv, const std::string& prefix,
                                    const BehaviorProfile& defaults) {
  BehaviorProfile p = defaults;
  p.p_no_click = kv.get_double(prefix + ".p_no_click", p.p_no_click);
  p.p_answer_only = kv.get_double(prefix + ".p_answer_only", p.p_answer_only);
  p.p_ot_only = kv.get_double(prefix + ".p_ot_only", p.p_ot_only);
  p.p_both = kv.get_double(prefix + ".p_both", p.p_both);
  p.p_other_only = kv.get_double(prefix + ".p_other_only", p.p_other_only);
  p.p_reformulate_given_no_sat =
      kv.get_double(prefix + ".p_reformulate_given_no_sat", p.p_reformulate_given_no_sat);
  p.p_related_click = kv.get_double(prefix + ".p_related_click", p.p_related_click);
  p.p_answer_expansion = kv.get_double(prefix + ".p_answer_expansion", p.p_answer_expansion);
  p.serp_dwell_log_mu = kv.get_double(prefix + ".serp_dwell_log_mu", p.serp_dwell_log_mu);
  p.serp_dwell_log_sigma = kv.get_double(prefix + ".serp_dwell_log_sigma", p.serp_dwell_log_sigma);
  p.source_dwell_log_mu = kv.get_double(prefix + ".source_dwell_log_mu", p.source_dwell_log_mu);
  p.source_dwell_log_sigma =
      kv.get_double(prefix + ".source_dwell_log_sigma", p.source_dwell_log_sigma);
  p.behavior_noise = kv.get_double(prefix + ".behavior_noise", p.behavior_noise);
  return p;
}

TrainConfig qa_config_from(const KeyValueConfig& kv, const std::string& prefix,
                           TrainConfig defaults) {
  TrainConfig cfg = defaults;
  cfg.epochs = static_cast<std::size_t>(kv.get_int(prefix + ".epochs", static_cast<std::int64_t>(cfg.epochs)));
  cfg.learning_rate = kv.get_double(prefix + ".learning_rate", cfg.learning_rate);
  cfg.l2 = kv.get_double(prefix + ".l2", cfg.l2);
  cfg.batch_size = static_cast<std::size_t>(kv.get_int(prefix + ".batch_size", static_cast<std::int64_t>(cfg.batch_size)));
  const std::string loss = kv.get_string(prefix + ".loss", std::string(loss_kind_name(cfg.loss)));
  if (loss == "ce") cfg.loss = LossKind::kCe;
  else if (loss == "mse") cfg.loss = LossKind::kMse;
  else throw ConfigError(prefix + ".loss: expected ce or mse");
  return cfg;
}

}  // namespace

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& kv) {
  PipelineConfig cfg;
  cfg.seed = kv.get_uint("seed", cfg.seed);

  cfg.sim.n_pairs = static_cast<std::size_t>(kv.get_int("sim.n_pairs", static_cast<std::int64_t>(cfg.sim.n_pairs)));
  cfg.sim.positive_rate = kv.get_double("sim.positive_rate", cfg.sim.positive_rate);
  cfg.sim.impressions_per_pair =
      kv.get_double("sim.impressions_per_pair", cfg.sim.impressions_per_pair);
  cfg.sim.judge_error_rate = kv.get_double("sim.judge_error_rate", cfg.sim.judge_error_rate);
  cfg.sim.n_judges = static_cast<std::size_t>(kv.get_int("sim.n_judges", static_cast<std::int64_t>(cfg.sim.n_judges)));
  cfg.sim.vocab_size = static_cast<std::size_t>(kv.get_int("sim.vocab_size", static_cast<std::int64_t>(cfg.sim.vocab_size)));
  cfg.sim.zipf_exponent = kv.get_double("sim.zipf_exponent", cfg.sim.zipf_exponent);
  cfg.sim.filler_min = static_cast<std::size_t>(kv.get_int("sim.filler_min", static_cast<std::int64_t>(cfg.sim.filler_min)));
  cfg.sim.filler_max = static_cast<std::size_t>(kv.get_int("sim.filler_max", static_cast<std::int64_t>(cfg.sim.filler_max)));
  cfg.sim.sat_threshold_ms = kv.get_int("sim.sat_threshold_ms", cfg.sim.sat_threshold_ms);
  cfg.sim.multi_impression = kv.get_bool("sim.multi_impression", cfg.sim.multi_impression);
  cfg.sim.relevant = profile_from_config(kv, "profile.relevant", cfg.sim.relevant);
  cfg.sim.irrelevant = profile_from_config(kv, "profile.irrelevant", cfg.sim.irrelevant);

  cfg.weak_pool_pairs = static_cast<std::size_t>(kv.get_int("weakpool.n_pairs", static_cast<std::int64_t>(cfg.weak_pool_pairs)));

  cfg.agg.sat_threshold_ms = kv.get_int("agg.sat_ms", cfg.agg.sat_threshold_ms);
  cfg.agg.min_impressions = static_cast<std::size_t>(kv.get_int("agg.min_impressions", static_cast<std::int64_t>(cfg.agg.min_impressions)));

  cfg.feedback.kind = kv.get_string("feedback.model", cfg.feedback.kind);
  cfg.feedback.gbdt.n_trees = static_cast<std::size_t>(kv.get_int("feedback.gbdt.n_trees", static_cast<std::int64_t>(cfg.feedback.gbdt.n_trees)));
  cfg.feedback.gbdt.learning_rate =
      kv.get_double("feedback.gbdt.learning_rate", cfg.feedback.gbdt.learning_rate);
  cfg.feedback.gbdt.max_depth = static_cast<std::size_t>(kv.get_int("feedback.gbdt.max_depth", static_cast<std::int64_t>(cfg.feedback.gbdt.max_depth)));
  cfg.feedback.gbdt.min_leaf = static_cast<std::size_t>(kv.get_int("feedback.gbdt.min_leaf", static_cast<std::int64_t>(cfg.feedback.gbdt.min_leaf)));
  cfg.feedback.gbdt.l2_leaf = kv.get_double("feedback.gbdt.l2_leaf", cfg.feedback.gbdt.l2_leaf);
  cfg.feedback.dt.max_depth = static_cast<std::size_t>(kv.get_int("feedback.dt.max_depth", static_cast<std::int64_t>(cfg.feedback.dt.max_depth)));
  cfg.feedback.dt.min_leaf = static_cast<std::size_t>(kv.get_int("feedback.dt.min_leaf", static_cast<std::int64_t>(cfg.feedback.dt.min_leaf)));
  cfg.feedback.rf.n_trees = static_cast<std::size_t>(kv.get_int("feedback.rf.n_trees", static_cast<std::int64_t>(cfg.feedback.rf.n_trees)));
  cfg.feedback.rf.max_depth = static_cast<std::size_t>(kv.get_int("feedback.rf.max_depth", static_cast<std::int64_t>(cfg.feedback.rf.max_depth)));
  cfg.feedback.rf.min_leaf = static_cast<std::size_t>(kv.get_int("feedback.rf.min_leaf", static_cast<std::int64_t>(cfg.feedback.rf.min_leaf)));
  cfg.feedback.lr.epochs = static_cast<std::size_t>(kv.get_int("feedback.lr.epochs", static_cast<std::int64_t>(cfg.feedback.lr.epochs)));
  cfg.feedback.lr.learning_rate =
      kv.get_double("feedback.lr.learning_rate", cfg.feedback.lr.learning_rate);
  cfg.feedback.lr.l2 = kv.get_double("feedback.lr.l2", cfg.feedback.lr.l2);

  cfg.weak.tau_high = kv.get_double("weak.tau_high", cfg.weak.tau_high);
  cfg.weak.tau_low = kv.get_double("weak.tau_low", cfg.weak.tau_low);
  cfg.weak.balance = kv.get_bool("weak.balance", cfg.weak.balance);

  cfg.qa_pre = qa_config_from(kv, "qa.pre", cfg.qa_pre);
  cfg.qa_fine = qa_config_from(kv, "qa.fine", cfg.qa_fine);
  cfg.qa_finetune_pairs = static_cast<std::size_t>(kv.get_int("qa.finetune_pairs", static_cast<std::int64_t>(cfg.qa_finetune_pairs)));
  return cfg;
}

void PipelineReport::add(const std::string& key, const std::string& value) {
  items.emplace_back(key, value);
}

void PipelineReport::add(const std::string& key, double value) {
  items.emplace_back(key, format_double(value));
}

std::string PipelineReport::find(const std::string& key) const {
  for (const auto& [k, v] : items) {
    if (k == key) return v;
  }
  throw ConfigError("report key not found: " + key);
}

std::string PipelineReport::to_text(const StageMetadata& meta) const {
  std::string out;
  for (const auto& line : meta.header_lines()) {
    out += line;
    out += '\n';
  }
  for (const auto& [key, value] : items) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

void stage_simulate(const SimConfig& cfg, const SimulateOutputs& out) {
  const auto pairs = gen_pairs(cfg);
  const auto header = meta_lines("simulate", cfg.seed, {});

  {
    std::ofstream log(out.log, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write " + out.log.string());
    for (const auto& line : header) log << line << '\n';
    for_each_pair_sessions(pairs, cfg, [&log](std::size_t, std::vector<std::string>& lines) {
      for (const auto& line : lines) log << line << '\n';
    });
  }

  std::vector<std::string> truth_lines = header;
  truth_lines.push_back("# qp_id\ttruth");
  for (const auto& sim_pair : pairs) {
    truth_lines.push_back(sim_pair.pair.qp_id + '\t' + (sim_pair.truth ? '1' : '0'));
  }
  write_lines(out.truth, truth_lines);

  const auto gold = gen_gold_labels(pairs, cfg);
  std::vector<std::string> gold_lines = header;
  gold_lines.push_back("# qp_id\tgold");
  for (const auto& [qp_id, label] : gold) {
    gold_lines.push_back(qp_id + '\t' + (label ? '1' : '0'));
  }
  write_lines(out.gold, gold_lines);

  std::vector<QaExample> examples;
  examples.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    QaExample example;
    example.pair = pairs[i].pair;
    example.pair.label = gold[i].second;
    example.target = gold[i].second ? 1.0 : 0.0;
    examples.push_back(std::move(example));
  }
  write_file(out.pairs, pairs_tsv(examples, header));
}

void stage_aggregate(const std::filesystem::path& log_path,
                     const std::filesystem::path& out_path, const AggregationConfig& cfg,
                     std::uint64_t seed) {
  std::ifstream in(log_path);
  if (!in) throw IoError("cannot open " + log_path.string());

  // Events are grouped per session id while streaming so large logs never
  // materialize as one flat line vector.
  std::map<std::string, std::size_t> session_index;
  std::vector<Session> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    auto event = parse_log_line(line, line_no);
    if (!event) continue;
    auto [it, inserted] = session_index.try_emplace(event->session_id, sessions.size());
    if (inserted) sessions.push_back(Session{event->session_id, {}});
    sessions[it->second].events.push_back(std::move(*event));
  }

  FeatureAccumulator acc;
  for (auto& session : sessions) {
    finalize_session_events(session);
    for (const auto& impression : extract_impressions(session, cfg.sat_threshold_ms)) {
      acc.add(impression);
    }
    session.events.clear();
    session.events.shrink_to_fit();
  }
  const AggregateResult result = acc.emit(cfg);

  auto header = meta_lines("aggregate", seed, {log_path});
  header.push_back("# sat_threshold_ms=" + std::to_string(cfg.sat_threshold_ms) +
                   " min_impressions=" + std::to_string(cfg.min_impressions) +
                   " dropped_groups=" + std::to_string(result.dropped_groups) +
                   " dropped_impressions=" + std::to_string(result.dropped_impressions));
  std::ostringstream body;
  write_features_tsv(body, result.features, header);
  write_file(out_path, body.str());
}

std::vector<FeedbackDatasetRow> load_feedback_rows(const std::filesystem::path& features_path,
                                                   const std::filesystem::path& gold_path) {
  const auto lines = read_lines(features_path);
  const auto features = read_features_tsv(lines);
  const auto gold = read_label_tsv(gold_path);
  std::vector<FeedbackDatasetRow> rows;
  rows.reserve(features.size());
  for (const auto& f : features) {
    auto it = gold.find(f.qp_id);
    if (it == gold.end()) continue;
    rows.push_back(FeedbackDatasetRow{f.qp_id, f, it->second});
  }
  return rows;
}

FeedbackModel train_feedback_kind(const FeedbackTrainSpec& spec,
                                  std::span<const FeedbackDatasetRow> rows, std::uint64_t seed) {
  if (spec.kind == "lr") {
    LrOptions opts = spec.lr;
    opts.seed = seed;
    return train_lr(rows, opts);
  }
  if (spec.kind == "dt") {
    DtOptions opts = spec.dt;
    opts.seed = seed;
    return train_dt(rows, opts);
  }
  if (spec.kind == "rf") {
    RfOptions opts = spec.rf;
    opts.seed = seed;
    return train_rf(rows, opts);
  }
  if (spec.kind == "gbdt") {
    GbdtOptions opts = spec.gbdt;
    opts.seed = seed;
    return train_gbdt(rows, opts);
  }
  if (spec.kind.rfind("baseline:", 0) == 0) {
    const int index = std::atoi(spec.kind.c_str() + 9);
    return train_baseline(rows, index);
  }
  throw ConfigError("unknown feedback model kind \"" + spec.kind +
                    "\" (expected lr|dt|rf|gbdt|baseline:<index>)");
}

FeedbackMetrics eval_feedback(const FeedbackModel& model,
                              std::span<const FeedbackDatasetRow> rows) {
  std::vector<ScoredLabel> scored;
  scored.reserve(rows.size());
  for (const auto& row : rows) {
    scored.push_back(ScoredLabel{predict(model, row.features), row.label});
  }
  FeedbackMetrics metrics;
  metrics.auc = auc(scored);
  const AccF1 a = acc_f1(scored, 0.5);
  metrics.acc = a.acc;
  metrics.f1 = a.f1;
  return metrics;
}

PipelineReport stage_train_feedback(const FeedbackTrainSpec& spec,
                                    const std::filesystem::path& features_path,
                                    const std::filesystem::path& gold_path,
                                    const std::filesystem::path& model_out, std::uint64_t seed) {
  const auto rows = load_feedback_rows(features_path, gold_path);
  if (rows.empty()) throw EmptyDataset();
  const SplitIndices split = split_701010(rows.size(), seed);

  std::vector<FeedbackDatasetRow> train_rows, dev_rows, test_rows;
  for (std::size_t i : split.train) train_rows.push_back(rows[i]);
  for (std::size_t i : split.dev) dev_rows.push_back(rows[i]);
  for (std::size_t i : split.test) test_rows.push_back(rows[i]);

  const FeedbackModel model = train_feedback_kind(spec, train_rows, seed);

  std::string text;
  for (const auto& line : meta_lines("train-feedback", seed, {features_path, gold_path})) {
    text += line;
    text += '\n';
  }
  text += model_to_json(model);
  write_file(model_out, text);

  PipelineReport report;
  report.add("model.kind", spec.kind);
  report.add("split.train", static_cast<double>(train_rows.size()));
  report.add("split.dev", static_cast<double>(dev_rows.size()));
  report.add("split.test", static_cast<double>(test_rows.size()));
  const FeedbackMetrics train_m = eval_feedback(model, train_rows);
  report.add("train.auc", train_m.auc);
  report.add("train.acc", train_m.acc);
  report.add("train.f1", train_m.f1);
  if (!dev_rows.empty()) {
    const FeedbackMetrics dev_m = eval_feedback(model, dev_rows);
    report.add("dev.auc", dev_m.auc);
    report.add("dev.acc", dev_m.acc);
    report.add("dev.f1", dev_m.f1);
  }
  if (!test_rows.empty()) {
    const FeedbackMetrics test_m = eval_feedback(model, test_rows);
    report.add("test.auc", test_m.auc);
    report.add("test.acc", test_m.acc);
    report.add("test.f1", test_m.f1);
  }
  return report;
}

void stage_pr_curve(const FeedbackModel& model, std::span<const FeedbackDatasetRow> rows,
                    const std::filesystem::path& out_path, std::uint64_t seed,
                    const std::vector<std::filesystem::path>& inputs) {
  std::vector<ScoredLabel> scored;
  scored.reserve(rows.size());
  for (const auto& row : rows) {
    scored.push_back(ScoredLabel{predict(model, row.features), row.label});
  }
  const PRCurve curve = pr_curve(scored);
  std::vector<std::string> lines = meta_lines("pr-curve", seed, inputs);
  lines.push_back("# threshold\tprecision\trecall");
  for (const auto& point : curve.points) {
    lines.push_back(format_double(point.threshold) + '\t' + format_double(point.precision) +
                    '\t' + format_double(point.recall));
  }
  write_lines(out_path, lines);
}

WeakLabelStats stage_weak_label(const FeedbackModel& model,
                                const std::filesystem::path& features_path,
                                const std::filesystem::path& pairs_in,
                                const WeakLabelOutputs& out, const WeakLabelConfig& cfg,
                                bool emit_scores) {
  const auto features = read_features_tsv(read_lines(features_path));
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(features.size());
  for (const auto& f : features) {
    scores.emplace_back(f.qp_id, predict(model, f));
  }

  ThresholdResult thresholded = threshold_labels(scores, cfg);
  std::vector<WeakLabel> labels = cfg.balance
                                      ? balance_sample(std::move(thresholded.labels), cfg.seed)
                                      : std::move(thresholded.labels);

  WeakLabelStats stats;
  stats.kept = labels.size();
  stats.discarded = thresholded.discarded.size();
  for (const auto& label : labels) {
    ++(label.label ? stats.positives : stats.negatives);
  }

  const std::vector<std::filesystem::path> inputs = {features_path};
  std::vector<std::string> label_lines = meta_lines("weak-label", cfg.seed, inputs);
  label_lines.push_back("# qp_id\tscore\tlabel");
  for (const auto& label : labels) {
    label_lines.push_back(label.qp_id + '\t' + format_double(label.score) + '\t' +
                          (label.label ? '1' : '0'));
  }
  write_lines(out.labels, label_lines);

  std::vector<std::string> discard_lines = meta_lines("weak-label-discards", cfg.seed, inputs);
  discard_lines.push_back("# qp_id\tscore");
  for (const auto& [qp_id, score] : thresholded.discarded) {
    discard_lines.push_back(qp_id + '\t' + format_double(score));
  }
  write_lines(out.discarded, discard_lines);

  if (!out.pairs_out.empty()) {
    const auto pool = parse_pairs_tsv(read_lines(pairs_in));
    std::map<std::string, const QaExample*> by_id;
    for (const auto& example : pool) by_id[example.pair.qp_id] = &example;
    std::vector<QaExample> joined;
    joined.reserve(labels.size());
    for (const auto& label : labels) {
      auto it = by_id.find(label.qp_id);
      if (it == by_id.end()) {
        throw IoError("weak label " + label.qp_id + " has no pair text in " + pairs_in.string());
      }
      QaExample example;
      example.pair = it->second->pair;
      example.pair.label = label.label;
      example.target = emit_scores ? label.score : (label.label ? 1.0 : 0.0);
      joined.push_back(std::move(example));
    }
    write_file(out.pairs_out,
               pairs_tsv(joined, meta_lines("weak-label-pairs", cfg.seed, {features_path, pairs_in})));
  }
  return stats;
}

TrainTrace stage_train_qa(const std::filesystem::path& pairs_path,
                          const std::filesystem::path& model_in,
                          const std::filesystem::path& model_out, const TrainConfig& cfg,
                          TrainStage target_stage) {
  const auto examples = parse_pairs_tsv(read_lines(pairs_path));
  RelevanceModel model = model_in.empty() ? RelevanceModel() : load_qa_model(model_in);
  const TrainTrace trace = train(model, examples, cfg, target_stage);

  std::vector<std::filesystem::path> inputs = {pairs_path};
  if (!model_in.empty()) inputs.push_back(model_in);
  std::string text;
  for (const auto& line : meta_lines("train-qa", cfg.seed, inputs)) {
    text += line;
    text += '\n';
  }
  text += qa_model_to_json(model);
  write_file(model_out, text);
  return trace;
}

QaEvalResult stage_eval_qa(const std::filesystem::path& model_path,
                           const std::filesystem::path& pairs_path) {
  const RelevanceModel model = load_qa_model(model_path);
  const auto examples = parse_pairs_tsv(read_lines(pairs_path));
  return evaluate(model, examples);
}

PipelineReport run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  PipelineReport report;
  report.add("seed", static_cast<double>(cfg.seed));

  // Labeled corpus.
  SimConfig sim = cfg.sim;
  sim.seed = derive_seed(cfg.seed, kSimStream);
  SimulateOutputs sim_out{out_dir / "log.jsonl", out_dir / "truth.tsv", out_dir / "gold.tsv",
                          out_dir / "pairs.tsv"};
  stage_simulate(sim, sim_out);
  report.add("sim.n_pairs", static_cast<double>(sim.n_pairs));
  report.add("sim.seed", static_cast<double>(sim.seed));

  stage_aggregate(sim_out.log, out_dir / "features.tsv", cfg.agg, sim.seed);

  // Feedback models; the configured kind plus the fixed report set.
  const std::uint64_t feedback_seed = derive_seed(cfg.seed, kFeedbackStream);
  PipelineReport feedback_report = stage_train_feedback(
      cfg.feedback, out_dir / "features.tsv", sim_out.gold, out_dir / "feedback_model.json",
      feedback_seed);
  for (const auto& [key, value] : feedback_report.items) {
    report.add("feedback." + key, value);
  }

  const auto rows = load_feedback_rows(out_dir / "features.tsv", sim_out.gold);
  const SplitIndices split = split_701010(rows.size(), feedback_seed);
  std::vector<FeedbackDatasetRow> train_rows, test_rows;
  for (std::size_t i : split.train) train_rows.push_back(rows[i]);
  for (std::size_t i : split.test) test_rows.push_back(rows[i]);

  {
    FeedbackTrainSpec dt_spec = cfg.feedback;
    dt_spec.kind = "dt";
    const FeedbackModel dt_model = train_feedback_kind(dt_spec, train_rows, feedback_seed);
    report.add("feedback.dt.test.auc", eval_feedback(dt_model, test_rows).auc);
    FeedbackTrainSpec base_spec = cfg.feedback;
    base_spec.kind = "baseline:" + std::to_string(static_cast<int>(kAnswerCtr));
    const FeedbackModel base_model = train_feedback_kind(base_spec, train_rows, feedback_seed);
    report.add("feedback.answer_ctr.test.auc", eval_feedback(base_model, test_rows).auc);
  }

  // Precision-recall analogue of the raw AnswerCTR signal against truth.
  {
    const auto truth = read_label_tsv(sim_out.truth);
    std::vector<ScoredLabel> scored;
    scored.reserve(rows.size());
    for (const auto& row : rows) {
      scored.push_back(ScoredLabel{row.features.values[kAnswerCtr], truth.at(row.qp_id)});
    }
    const PRCurve curve = pr_curve(scored);
    report.add("pr.answer_ctr.recall_at_ctr_gt0", curve.recall_at_positive_score());
    report.add("pr.answer_ctr.max_precision", curve.max_precision());
  }

  // Weak pool: fresh unlabeled pairs scored by the trained feedback model.
  SimConfig pool = cfg.sim;
  pool.n_pairs = cfg.weak_pool_pairs;
  pool.seed = derive_seed(cfg.seed, kWeakPoolStream);
  SimulateOutputs pool_out{out_dir / "pool_log.jsonl", out_dir / "pool_truth.tsv",
                           out_dir / "pool_gold.tsv", out_dir / "pool_pairs.tsv"};
  stage_simulate(pool, pool_out);
  stage_aggregate(pool_out.log, out_dir / "pool_features.tsv", cfg.agg, pool.seed);

  const FeedbackModel feedback_model = load_model(out_dir / "feedback_model.json");
  WeakLabelConfig weak = cfg.weak;
  weak.seed = derive_seed(cfg.seed, kWeakStream);
  WeakLabelOutputs weak_out{out_dir / "weak_labels.tsv", out_dir / "weak_labels.discarded.tsv",
                            out_dir / "weak_pairs.tsv"};
  const WeakLabelStats weak_stats =
      stage_weak_label(feedback_model, out_dir / "pool_features.tsv", pool_out.pairs, weak_out,
                       weak, cfg.qa_pre.loss == LossKind::kMse);
  report.add("weak.kept", static_cast<double>(weak_stats.kept));
  report.add("weak.discarded", static_cast<double>(weak_stats.discarded));
  report.add("weak.positives", static_cast<double>(weak_stats.positives));
  report.add("weak.negatives", static_cast<double>(weak_stats.negatives));

  // Gold fine-tune and held-out sets reuse the feedback split.
  const auto labeled = parse_pairs_tsv(read_lines(sim_out.pairs));
  std::map<std::string, const QaExample*> labeled_by_id;
  for (const auto& example : labeled) labeled_by_id[example.pair.qp_id] = &example;
  auto collect = [&](std::span<const std::size_t> indices, std::size_t limit) {
    std::vector<QaExample> out;
    for (std::size_t i : indices) {
      if (out.size() == limit) break;
      auto it = labeled_by_id.find(rows[i].qp_id);
      if (it != labeled_by_id.end()) out.push_back(*it->second);
    }
    return out;
  };
  const auto finetune_examples = collect(split.train, cfg.qa_finetune_pairs);
  const auto test_examples = collect(split.test, rows.size());
  write_file(out_dir / "qa_finetune_pairs.tsv",
             pairs_tsv(finetune_examples, meta_lines("qa-finetune-pairs", feedback_seed,
                                                     {sim_out.pairs, sim_out.gold})));
  write_file(out_dir / "qa_test_pairs.tsv",
             pairs_tsv(test_examples, meta_lines("qa-test-pairs", feedback_seed,
                                                 {sim_out.pairs, sim_out.gold})));

  TrainConfig qa_pre = cfg.qa_pre;
  qa_pre.seed = derive_seed(cfg.seed, kQaStream);
  TrainConfig qa_fine = cfg.qa_fine;
  qa_fine.seed = derive_seed(qa_pre.seed, 1);

  stage_train_qa(out_dir / "weak_pairs.tsv", {}, out_dir / "qa_pretrained.json", qa_pre,
                 TrainStage::kPretrained);
  stage_train_qa(out_dir / "qa_finetune_pairs.tsv", out_dir / "qa_pretrained.json",
                 out_dir / "qa_two_stage.json", qa_fine, TrainStage::kFinetuned);
  stage_train_qa(out_dir / "qa_finetune_pairs.tsv", {}, out_dir / "qa_finetune_only.json",
                 qa_fine, TrainStage::kFinetuned);

  const QaEvalResult two_stage_eval =
      stage_eval_qa(out_dir / "qa_two_stage.json", out_dir / "qa_test_pairs.tsv");
  const QaEvalResult finetune_eval =
      stage_eval_qa(out_dir / "qa_finetune_only.json", out_dir / "qa_test_pairs.tsv");
  report.add("qa.two_stage.auc", two_stage_eval.auc);
  report.add("qa.two_stage.acc", two_stage_eval.acc);
  report.add("qa.finetune_only.auc", finetune_eval.auc);
  report.add("qa.finetune_only.acc", finetune_eval.acc);
  report.add("qa.delta_auc", two_stage_eval.auc - finetune_eval.auc);

  StageMetadata meta;
  meta.stage = "pipeline";
  meta.seed = cfg.seed;
  write_file(out_dir / "summary.txt", report.to_text(meta));
  return report;
}

}  // namespace qamine
