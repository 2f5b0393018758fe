#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qamine/features.hpp"
#include "qamine/session.hpp"

namespace qamine {

struct FeedbackDatasetRow {
  std::string qp_id;
  BehaviorFeatures features;
  bool label = false;
};

enum class ModelKind { kBaseline, kLr, kDt, kRf, kGbdt };

std::string_view model_kind_name(ModelKind kind);

/// Binary tree; routing rule is feature < threshold -> left. Leaves carry the
/// predicted value and the number of training rows they absorbed.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  std::size_t support = 0;
  std::unique_ptr<TreeNode> left;
  std::unique_ptr<TreeNode> right;

  bool is_leaf() const { return feature < 0; }
};

std::unique_ptr<TreeNode> clone_tree(const TreeNode* node);

struct BaselineParams {
  int feature_index = 0;
  double min_value = 0.0;
  double max_value = 0.0;
};

struct LrParams {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;    // z-score standardization, recorded at training
  std::vector<double> stddev;  // 1.0 for constant features
};

struct DtParams {
  std::unique_ptr<TreeNode> root;
};

struct RfParams {
  std::vector<std::unique_ptr<TreeNode>> trees;
  std::vector<std::uint64_t> tree_seeds;
  bool bootstrap = true;
  std::size_t feature_subsample = 0;
};

struct GbdtParams {
  std::vector<std::unique_ptr<TreeNode>> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;  // log-odds of the training positive rate
};

/// A trained implicit-feedback classifier. Move-only (trees own nodes);
/// clone() deep-copies. Serialized form is versioned JSON and byte-stable
/// under save/load round trips.
struct FeedbackModel {
  ModelKind kind = ModelKind::kBaseline;
  std::string feature_order_version;
  std::size_t n_features = 0;
  std::variant<BaselineParams, LrParams, DtParams, RfParams, GbdtParams> params;
  std::uint64_t seed = 0;
  std::map<std::string, double> hyperparameters;
  std::vector<double> loss_trace;    // per-epoch (LR) or per-round (GBDT) training loss
  std::vector<double> feature_gain;  // tree models: summed split gain per feature

  FeedbackModel clone() const;
};

/// Generic training matrix; covers both aggregated behavior features and the
/// per-impression label-aggregation route.
struct TrainingData {
  std::string feature_order_version;
  std::size_t n_features = 0;
  std::vector<std::vector<double>> x;
  std::vector<std::uint8_t> y;
};

TrainingData behavior_training_data(std::span<const FeedbackDatasetRow> rows);

struct LrOptions {
  std::size_t epochs = 300;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct DtOptions {
  std::size_t max_depth = 5;
  std::size_t min_leaf = 20;
  std::uint64_t seed = 0;
};

struct RfOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 5;
  std::size_t min_leaf = 20;
  std::size_t feature_subsample = 0;  // 0 -> ceil(sqrt(n_features))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct GbdtOptions {
  std::size_t n_trees = 200;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_leaf = 20;
  double l2_leaf = 1.0;
  std::uint64_t seed = 0;
};

/// Single-feature baseline: the raw feature min-max scaled over training
/// rows (0.5 everywhere when the feature is constant).
FeedbackModel train_baseline(std::span<const FeedbackDatasetRow> rows, int feature_index);
FeedbackModel train_baseline(const TrainingData& data, int feature_index);

/// L2-regularized logistic regression, full-batch gradient descent over
/// z-score standardized features, zero-initialized.
FeedbackModel train_lr(std::span<const FeedbackDatasetRow> rows, const LrOptions& opts = {});
FeedbackModel train_lr(const TrainingData& data, const LrOptions& opts = {});

/// CART with Gini impurity; thresholds are midpoints between consecutive
/// distinct sorted values; ties break to the lowest feature index, then the
/// lowest threshold; leaves predict the positive fraction.
FeedbackModel train_dt(std::span<const FeedbackDatasetRow> rows, const DtOptions& opts = {});
FeedbackModel train_dt(const TrainingData& data, const DtOptions& opts = {});

/// Bagged CART trees with per-split feature subsampling; per-tree seeds are
/// derived from the master seed, so tree construction is order-independent.
FeedbackModel train_rf(std::span<const FeedbackDatasetRow> rows, const RfOptions& opts = {});
FeedbackModel train_rf(const TrainingData& data, const RfOptions& opts = {});

/// Gradient boosting on logistic loss: regression trees (variance-reduction
/// splits) fit to residuals, Newton leaf values sum_g / (sum_h + l2_leaf).
FeedbackModel train_gbdt(std::span<const FeedbackDatasetRow> rows, const GbdtOptions& opts = {});
FeedbackModel train_gbdt(const TrainingData& data, const GbdtOptions& opts = {});

/// Relevance score in [0, 1]. Throws FeatureOrderMismatch when the model was
/// trained on a different feature order contract.
double predict(const FeedbackModel& model, const BehaviorFeatures& features);
double predict_raw(const FeedbackModel& model, std::span<const double> features);

/// Label-aggregation route: scores each impression with a model trained on
/// per-impression signal vectors, averages, and thresholds the mean at 0.5.
bool predict_label_aggregated(const FeedbackModel& model,
                              std::span<const ImpressionSignals> impressions);

/// Total split gain per feature, normalized to sum 1, descending (ties by
/// index). Tree-based models only.
std::vector<std::pair<std::size_t, double>> feature_importance(const FeedbackModel& model);

/// Root-to-leaf paths of a decision tree whose leaf purity reaches
/// min_leaf_purity, rendered as conjunction rules over feature names.
std::vector<std::string> extract_rules(const FeedbackModel& model, double min_leaf_purity = 0.8);

std::string model_to_json(const FeedbackModel& model);
FeedbackModel model_from_json(std::string_view text);
void save_model(const FeedbackModel& model, const std::filesystem::path& path);
FeedbackModel load_model(const std::filesystem::path& path);

/// Seeded-shuffle split with fixed 7:1:1 proportions (train/dev/test).
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

SplitIndices split_701010(std::size_t n, std::uint64_t seed);

}  // namespace qamine
