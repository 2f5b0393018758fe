#include "qamine/qa_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "qamine/error.hpp"
#include "qamine/io.hpp"
#include "qamine/metrics.hpp"
#include "qamine/rng.hpp"

namespace qamine {

namespace {

using nlohmann::json;

constexpr double kClip = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::uint32_t bucket_of(std::string_view key) {
  return static_cast<std::uint32_t>(fnv1a64(key) % kHashDim);
}

std::vector<std::pair<std::string, std::string>> adjacent_bigrams(
    std::span<const std::string> tokens) {
  std::vector<std::pair<std::string, std::string>> bigrams;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    bigrams.emplace_back(tokens[i], tokens[i + 1]);
  }
  return bigrams;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

SparseFeatures featurize(const QAPair& pair) { return featurize(pair.question, pair.passage); }

SparseFeatures featurize(std::string_view question, std::string_view passage) {
  const auto q_tokens = tokenize(question);
  const auto p_tokens = tokenize(passage);
  if (q_tokens.empty()) throw EmptyText("question");
  if (p_tokens.empty()) throw EmptyText("passage");

  const std::set<std::string> q_set(q_tokens.begin(), q_tokens.end());
  const std::set<std::string> p_set(p_tokens.begin(), p_tokens.end());

  std::unordered_map<std::uint32_t, double> buckets;
  std::size_t unigram_matches = 0;
  for (const auto& token : q_set) {
    if (p_set.count(token) != 0) {
      ++unigram_matches;
      buckets[bucket_of(token)] += 1.0;
    }
  }

  const auto q_bigrams = adjacent_bigrams(q_tokens);
  const auto p_bigrams = adjacent_bigrams(p_tokens);
  const std::set<std::pair<std::string, std::string>> q_bigram_set(q_bigrams.begin(),
                                                                   q_bigrams.end());
  const std::set<std::pair<std::string, std::string>> p_bigram_set(p_bigrams.begin(),
                                                                   p_bigrams.end());
  std::size_t bigram_matches = 0;
  for (const auto& bigram : q_bigram_set) {
    if (p_bigram_set.count(bigram) != 0) {
      ++bigram_matches;
      buckets[bucket_of(bigram.first + '\x1f' + bigram.second)] += 1.0;
    }
  }

  SparseFeatures features;
  features.hashed.assign(buckets.begin(), buckets.end());
  std::sort(features.hashed.begin(), features.hashed.end());
  features.scalars[0] = static_cast<double>(unigram_matches) / static_cast<double>(q_set.size());
  features.scalars[1] = q_bigram_set.empty() ? 0.0
                                             : static_cast<double>(bigram_matches) /
                                                   static_cast<double>(q_bigram_set.size());
  features.scalars[2] = std::log(1.0 + static_cast<double>(p_tokens.size())) / 10.0;
  features.scalars[3] = std::log(1.0 + static_cast<double>(q_tokens.size())) / 10.0;
  return features;
}

double ce_loss(std::span<const double> labels, std::span<const double> outputs) {
  if (labels.size() != outputs.size()) throw LengthMismatch(labels.size(), outputs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = std::clamp(outputs[i], kClip, 1.0 - kClip);
    loss -= labels[i] * std::log(y) + (1.0 - labels[i]) * std::log(1.0 - y);
  }
  return loss / static_cast<double>(labels.size());
}

double mse_loss(std::span<const double> outputs, std::span<const double> targets) {
  if (outputs.size() != targets.size()) throw LengthMismatch(outputs.size(), targets.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double diff = outputs[i] - targets[i];
    loss += diff * diff;
  }
  return loss / static_cast<double>(outputs.size());
}

std::string_view train_stage_name(TrainStage stage) {
  switch (stage) {
    case TrainStage::kUntrained: return "untrained";
    case TrainStage::kPretrained: return "pretrained";
    case TrainStage::kFinetuned: return "finetuned";
  }
  return "untrained";
}

std::string_view loss_kind_name(LossKind kind) {
  return kind == LossKind::kCe ? "ce" : "mse";
}

TrainConfig default_pretrain_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.2;
  return cfg;
}

TrainConfig default_finetune_config() {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.1;
  return cfg;
}

RelevanceModel::RelevanceModel() : weights_(kHashDim, 0.0) {}

double RelevanceModel::score(const SparseFeatures& features) const {
  double logit = bias_;
  for (const auto& [bucket, value] : features.hashed) logit += weights_[bucket] * value;
  for (std::size_t s = 0; s < kScalarFeatureCount; ++s) {
    logit += scalar_weights_[s] * features.scalars[s];
  }
  return sigmoid(logit);
}

double RelevanceModel::score(const QAPair& pair) const { return score(featurize(pair)); }

double RelevanceModel::batch_loss(std::span<const SparseFeatures> features,
                                  std::span<const double> targets, LossKind loss,
                                  Gradients* gradients) const {
  if (features.size() != targets.size()) throw LengthMismatch(features.size(), targets.size());
  const double n = static_cast<double>(features.size());

  std::unordered_map<std::uint32_t, double> hashed_grad;
  std::vector<double> outputs(features.size());
  double loss_value = 0.0;

  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = score(features[i]);
    outputs[i] = y;
    // dLoss/dlogit per example, already divided by the batch size.
    double dz = 0.0;
    if (loss == LossKind::kCe) {
      dz = (y - targets[i]) / n;
    } else {
      dz = 2.0 * (y - targets[i]) * y * (1.0 - y) / n;
    }
    if (gradients != nullptr) {
      for (const auto& [bucket, value] : features[i].hashed) hashed_grad[bucket] += dz * value;
      for (std::size_t s = 0; s < kScalarFeatureCount; ++s) {
        gradients->scalars[s] += dz * features[i].scalars[s];
      }
      gradients->bias += dz;
    }
  }
  if (loss == LossKind::kCe) {
    loss_value = ce_loss(targets, outputs);
  } else {
    loss_value = mse_loss(outputs, targets);
  }
  if (gradients != nullptr) {
    gradients->hashed.assign(hashed_grad.begin(), hashed_grad.end());
    std::sort(gradients->hashed.begin(), gradients->hashed.end());
  }
  return loss_value;
}

struct RelevanceModelAccess {
  static std::vector<double>& weights(RelevanceModel& m) { return m.weights_; }
  static std::array<double, kScalarFeatureCount>& scalars(RelevanceModel& m) {
    return m.scalar_weights_;
  }
  static double& bias(RelevanceModel& m) { return m.bias_; }
};

TrainTrace train(RelevanceModel& model, std::span<const QaExample> examples,
                 const TrainConfig& cfg, TrainStage target_stage) {
  if (examples.empty()) throw EmptyDataset();
  std::vector<SparseFeatures> features;
  std::vector<double> targets;
  features.reserve(examples.size());
  targets.reserve(examples.size());
  for (const auto& example : examples) {
    if (example.target < 0.0 || example.target > 1.0) {
      throw LossTargetMismatch("target " + format_double(example.target) + " outside [0, 1]");
    }
    if (cfg.loss == LossKind::kCe && example.target != 0.0 && example.target != 1.0) {
      throw LossTargetMismatch("cross-entropy needs boolean targets, got " +
                               format_double(example.target));
    }
    features.push_back(featurize(example.pair));
    targets.push_back(example.target);
  }

  auto& weights = RelevanceModelAccess::weights(model);
  auto& scalars = RelevanceModelAccess::scalars(model);
  double& bias = RelevanceModelAccess::bias(model);

  Rng rng(derive_seed(cfg.seed, 0x71617472ULL));  // "qatr" stream
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainTrace trace;
  std::vector<SparseFeatures> batch_features;
  std::vector<double> batch_targets;
  const std::size_t batch_size = std::max<std::size_t>(cfg.batch_size, 1);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch_features.clear();
      batch_targets.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch_features.push_back(features[order[k]]);
        batch_targets.push_back(targets[order[k]]);
      }
      RelevanceModel::Gradients grad;
      model.batch_loss(batch_features, batch_targets, cfg.loss, &grad);

      if (cfg.l2 > 0.0 && cfg.learning_rate > 0.0) {
        const double decay = 1.0 - cfg.learning_rate * cfg.l2;
        for (double& w : weights) w *= decay;
        for (double& s : scalars) s *= decay;
      }
      for (const auto& [bucket, g] : grad.hashed) weights[bucket] -= cfg.learning_rate * g;
      for (std::size_t s = 0; s < kScalarFeatureCount; ++s) {
        scalars[s] -= cfg.learning_rate * grad.scalars[s];
      }
      bias -= cfg.learning_rate * grad.bias;
    }
    trace.epoch_loss.push_back(model.batch_loss(features, targets, cfg.loss, nullptr));
  }

  model.set_stage(target_stage);
  return trace;
}

RelevanceModel two_stage(std::span<const QaExample> pretrain_examples,
                         std::span<const QaExample> finetune_examples,
                         const TrainConfig& cfg_pre, const TrainConfig& cfg_fine) {
  if (pretrain_examples.empty() || finetune_examples.empty()) throw EmptyDataset();
  RelevanceModel model;
  if (cfg_pre.epochs > 0) {
    train(model, pretrain_examples, cfg_pre, TrainStage::kPretrained);
  }
  train(model, finetune_examples, cfg_fine, TrainStage::kFinetuned);
  return model;
}

QaEvalResult evaluate(const RelevanceModel& model, std::span<const QaExample> examples) {
  std::vector<ScoredLabel> scored;
  scored.reserve(examples.size());
  for (const auto& example : examples) {
    if (example.target != 0.0 && example.target != 1.0) {
      throw LossTargetMismatch("evaluation needs boolean gold targets");
    }
    scored.push_back(ScoredLabel{model.score(example.pair), example.target == 1.0});
  }
  QaEvalResult result;
  result.auc = auc(scored);
  result.acc = acc_f1(scored, 0.5).acc;
  return result;
}

std::string qa_model_to_json(const RelevanceModel& model) {
  json weights = json::array();
  const auto hashed = model.hashed_weights();
  for (std::size_t i = 0; i < hashed.size(); ++i) {
    if (hashed[i] != 0.0) weights.push_back(json::array({i, hashed[i]}));
  }
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "qa-relevance";
  doc["dim"] = kHashDim;
  doc["hash"] = "fnv1a64-mod";
  doc["tokenizer_version"] = std::string(kTokenizerVersion);
  doc["stage"] = std::string(train_stage_name(model.stage()));
  doc["bias"] = model.bias();
  doc["scalar_weights"] = std::vector<double>(model.scalar_weights().begin(),
                                              model.scalar_weights().end());
  doc["weights"] = std::move(weights);
  return doc.dump(2) + "\n";
}

RelevanceModel qa_model_from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw IoError("qa model file: not a JSON object");
  if (doc.value("format_version", 0) != 1 || doc.value("kind", "") != "qa-relevance") {
    throw IoError("qa model file: unsupported format");
  }
  if (doc.value("dim", std::size_t{0}) != kHashDim) {
    throw IoError("qa model file: hash dimension mismatch");
  }
  if (doc.value("tokenizer_version", "") != kTokenizerVersion) {
    throw IoError("qa model file: tokenizer version mismatch");
  }
  RelevanceModel model;
  const std::string stage = doc.value("stage", "untrained");
  if (stage == "pretrained") model.set_stage(TrainStage::kPretrained);
  else if (stage == "finetuned") model.set_stage(TrainStage::kFinetuned);
  RelevanceModelAccess::bias(model) = doc.at("bias").get<double>();
  const auto scalars = doc.at("scalar_weights").get<std::vector<double>>();
  if (scalars.size() != kScalarFeatureCount) throw IoError("qa model file: bad scalar_weights");
  std::copy(scalars.begin(), scalars.end(), RelevanceModelAccess::scalars(model).begin());
  auto& weights = RelevanceModelAccess::weights(model);
  for (const auto& entry : doc.at("weights")) {
    const std::size_t index = entry.at(0).get<std::size_t>();
    if (index >= kHashDim) throw IoError("qa model file: weight index out of range");
    weights[index] = entry.at(1).get<double>();
  }
  return model;
}

void save_qa_model(const RelevanceModel& model, const std::filesystem::path& path) {
  write_file(path, qa_model_to_json(model));
}

RelevanceModel load_qa_model(const std::filesystem::path& path) {
  return qa_model_from_json(read_file(path));
}

std::vector<QaExample> parse_pairs_tsv(std::span<const std::string> lines) {
  std::vector<QaExample> examples;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::array<std::string, 4> columns;
    std::size_t start = 0;
    std::size_t field = 0;
    for (; field < 4; ++field) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        columns[field] = line.substr(start);
        ++field;
        break;
      }
      columns[field] = line.substr(start, tab - start);
      start = tab + 1;
    }
    if (field != 4) {
      throw IoError("pairs TSV line " + std::to_string(line_no) + ": expected 4 columns");
    }
    QaExample example;
    example.pair.qp_id = columns[0];
    char* end = nullptr;
    example.target = std::strtod(columns[1].c_str(), &end);
    if (end == columns[1].c_str() || *end != '\0' || !std::isfinite(example.target)) {
      throw IoError("pairs TSV line " + std::to_string(line_no) + ": bad label_or_score");
    }
    example.pair.question = tsv_unescape(columns[2]);
    example.pair.passage = tsv_unescape(columns[3]);
    if (example.target == 0.0 || example.target == 1.0) {
      example.pair.label = example.target == 1.0;
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

std::string pairs_tsv(std::span<const QaExample> examples,
                      std::span<const std::string> metadata_lines) {
  std::string out;
  for (const auto& line : metadata_lines) {
    out += line;
    out += '\n';
  }
  out += "# qp_id\tlabel_or_score\tquestion\tpassage\n";
  for (const auto& example : examples) {
    out += example.pair.qp_id;
    out += '\t';
    out += format_double(example.target);
    out += '\t';
    out += tsv_escape(example.pair.question);
    out += '\t';
    out += tsv_escape(example.pair.passage);
    out += '\n';
  }
  return out;
}

}  // namespace qamine
