#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qamine {

struct QAPair {
  std::string qp_id;
  std::string question;
  std::string passage;
  std::optional<bool> label;
};

/// A training example: CE targets are 0/1 gold or weak labels, MSE targets
/// are raw feedback-model scores in [0,1].
struct QaExample {
  QAPair pair;
  double target = 0.0;
};

inline constexpr std::size_t kHashDim = std::size_t{1} << 18;
inline constexpr std::size_t kScalarFeatureCount = 4;
inline constexpr std::string_view kTokenizerVersion = "ascii-alnum-lower-v1";

/// Lowercased ASCII tokens split on any non-alphanumeric run.
std::vector<std::string> tokenize(std::string_view text);

/// Hashed interaction features. Buckets are FNV-1a 64 mod 2^18 of the token
/// (unigrams present in both question and passage) or of
/// "tok1\x1ftok2" (adjacent bigrams present in both); each distinct match
/// adds 1 to its bucket. Scalars: unigram overlap |Q cap P|/|Q| over distinct
/// tokens, the same for adjacent bigrams, log(1+|P|)/10 and log(1+|Q|)/10
/// over sequence lengths.
struct SparseFeatures {
  std::vector<std::pair<std::uint32_t, double>> hashed;  // sorted by bucket
  std::array<double, kScalarFeatureCount> scalars{};
};

SparseFeatures featurize(const QAPair& pair);
SparseFeatures featurize(std::string_view question, std::string_view passage);

/// Mean cross-entropy of outputs y against labels y_hat; outputs are clipped
/// to [1e-7, 1 - 1e-7] before the logs.
double ce_loss(std::span<const double> labels, std::span<const double> outputs);

/// Mean squared error of outputs against (weak score) targets.
double mse_loss(std::span<const double> outputs, std::span<const double> targets);

enum class LossKind { kCe, kMse };
enum class TrainStage { kUntrained, kPretrained, kFinetuned };

std::string_view train_stage_name(TrainStage stage);
std::string_view loss_kind_name(LossKind kind);

struct TrainConfig {
  std::size_t epochs = 20;
  double learning_rate = 0.1;
  double l2 = 1e-6;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  LossKind loss = LossKind::kCe;
};

/// Defaults from the committed pipeline configuration.
TrainConfig default_pretrain_config();
TrainConfig default_finetune_config();

class RelevanceModel {
 public:
  RelevanceModel();

  /// Relevance score, strictly inside (0, 1).
  double score(const SparseFeatures& features) const;
  double score(const QAPair& pair) const;

  TrainStage stage() const { return stage_; }
  void set_stage(TrainStage stage) { stage_ = stage; }

  std::span<const double> hashed_weights() const { return weights_; }
  std::span<const double> scalar_weights() const { return scalar_weights_; }
  double bias() const { return bias_; }

  /// Loss and data gradient (no regularization) of a batch; gradient outputs
  /// are optional. Exposed so tests can check the analytic gradient against
  /// finite differences.
  struct Gradients {
    std::vector<std::pair<std::uint32_t, double>> hashed;
    std::array<double, kScalarFeatureCount> scalars{};
    double bias = 0.0;
  };
  double batch_loss(std::span<const SparseFeatures> features, std::span<const double> targets,
                    LossKind loss, Gradients* gradients = nullptr) const;

  friend struct RelevanceModelAccess;

 private:
  std::vector<double> weights_;
  std::array<double, kScalarFeatureCount> scalar_weights_{};
  double bias_ = 0.0;
  TrainStage stage_ = TrainStage::kUntrained;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // training data loss after each epoch
};

/// Seeded-shuffle mini-batch SGD with L2 on the configured loss; advances the
/// stage tag to `target_stage`. CE requires 0/1 targets.
TrainTrace train(RelevanceModel& model, std::span<const QaExample> examples,
                 const TrainConfig& cfg, TrainStage target_stage);

/// Weak pre-training from fresh parameters followed by gold fine-tuning of
/// the same parameters; equivalent to two sequential train calls.
RelevanceModel two_stage(std::span<const QaExample> pretrain_examples,
                         std::span<const QaExample> finetune_examples,
                         const TrainConfig& cfg_pre, const TrainConfig& cfg_fine);

struct QaEvalResult {
  double auc = 0.0;
  double acc = 0.0;
};

/// AUC/ACC against boolean gold targets; throws DegenerateLabels on
/// single-class input.
QaEvalResult evaluate(const RelevanceModel& model, std::span<const QaExample> examples);

std::string qa_model_to_json(const RelevanceModel& model);
RelevanceModel qa_model_from_json(std::string_view text);
void save_qa_model(const RelevanceModel& model, const std::filesystem::path& path);
RelevanceModel load_qa_model(const std::filesystem::path& path);

/// Pair file: TSV `qp_id  label_or_score  question  passage`, text columns
/// tab-escaped, `#` lines ignored.
std::vector<QaExample> parse_pairs_tsv(std::span<const std::string> lines);
std::string pairs_tsv(std::span<const QaExample> examples,
                      std::span<const std::string> metadata_lines);

}  // namespace qamine
