#include "qamine/models.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <json.hpp>

#include "qamine/error.hpp"
#include "qamine/io.hpp"
#include "qamine/rng.hpp"

namespace qamine {

namespace {

using nlohmann::json;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double tree_eval(const TreeNode* node, std::span<const double> x) {
  while (!node->is_leaf()) {
    node = x[static_cast<std::size_t>(node->feature)] < node->threshold ? node->left.get()
                                                                        : node->right.get();
  }
  return node->value;
}

// Targets for one tree fit. With hessians present the leaf value is the
// Newton step sum_g / (sum_h + l2); otherwise it is the target mean.
struct TreeTargets {
  const std::vector<std::vector<double>>& x;
  std::span<const double> target;
  std::span<const double> hess;
  double l2_leaf = 0.0;
};

struct BuildContext {
  std::size_t max_depth = 0;
  std::size_t min_leaf = 1;
  std::size_t n_features = 0;
  std::size_t feature_subsample = 0;  // 0 = consider all features
  Rng* rng = nullptr;
  std::vector<double>* gain_accum = nullptr;
};

std::unique_ptr<TreeNode> make_leaf(const TreeTargets& t, std::span<const std::size_t> rows) {
  double sum_g = 0.0, sum_h = 0.0;
  for (std::size_t r : rows) {
    sum_g += t.target[r];
    if (!t.hess.empty()) sum_h += t.hess[r];
  }
  auto leaf = std::make_unique<TreeNode>();
  leaf->support = rows.size();
  leaf->value = t.hess.empty() ? sum_g / static_cast<double>(rows.size())
                               : sum_g / (sum_h + t.l2_leaf);
  return leaf;
}

// Best split by sum-of-squared-error decrease. On 0/1 targets this picks the
// same splits as Gini impurity (the two criteria differ by a constant
// factor); ties resolve to the lowest feature index, then lowest threshold,
// because candidates are scanned in that order and only strict improvements
// replace the incumbent.
std::unique_ptr<TreeNode> build_tree(const TreeTargets& t, const BuildContext& ctx,
                                     std::vector<std::size_t>& rows, std::size_t depth) {
  const std::size_t n = rows.size();
  bool pure = true;
  for (std::size_t i = 1; i < n && pure; ++i) pure = t.target[rows[i]] == t.target[rows[0]];
  if (depth >= ctx.max_depth || n < 2 * ctx.min_leaf || pure) {
    return make_leaf(t, rows);
  }

  std::vector<std::size_t> candidates;
  if (ctx.feature_subsample > 0 && ctx.feature_subsample < ctx.n_features) {
    candidates = ctx.rng->sample_indices(ctx.n_features, ctx.feature_subsample);
    std::sort(candidates.begin(), candidates.end());
  } else {
    candidates.resize(ctx.n_features);
    std::iota(candidates.begin(), candidates.end(), 0);
  }

  double total_sum = 0.0, total_sumsq = 0.0;
  for (std::size_t r : rows) {
    total_sum += t.target[r];
    total_sumsq += t.target[r] * t.target[r];
  }
  const double sse_total = total_sumsq - total_sum * total_sum / static_cast<double>(n);

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_gain = 0.0;
  std::vector<std::pair<double, std::size_t>> sorted(n);

  for (std::size_t f : candidates) {
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {t.x[rows[i]][f], rows[i]};
    std::sort(sorted.begin(), sorted.end());

    double left_sum = 0.0, left_sumsq = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = t.target[sorted[i - 1].second];
      left_sum += v;
      left_sumsq += v * v;
      if (sorted[i - 1].first == sorted[i].first) continue;
      const std::size_t nl = i, nr = n - i;
      if (nl < ctx.min_leaf || nr < ctx.min_leaf) continue;
      const double sse_left = left_sumsq - left_sum * left_sum / static_cast<double>(nl);
      const double right_sum = total_sum - left_sum;
      const double sse_right =
          (total_sumsq - left_sumsq) - right_sum * right_sum / static_cast<double>(nr);
      const double gain = sse_total - sse_left - sse_right;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = static_cast<int>(f);
        double threshold = 0.5 * (sorted[i - 1].first + sorted[i].first);
        if (threshold <= sorted[i - 1].first) threshold = sorted[i].first;
        best_threshold = threshold;
      }
    }
  }

  if (best_feature < 0) return make_leaf(t, rows);
  if (ctx.gain_accum != nullptr) {
    (*ctx.gain_accum)[static_cast<std::size_t>(best_feature)] += best_gain;
  }

  auto mid = std::stable_partition(rows.begin(), rows.end(), [&](std::size_t r) {
    return t.x[r][static_cast<std::size_t>(best_feature)] < best_threshold;
  });
  std::vector<std::size_t> left_rows(rows.begin(), mid);
  std::vector<std::size_t> right_rows(mid, rows.end());

  auto node = std::make_unique<TreeNode>();
  node->feature = best_feature;
  node->threshold = best_threshold;
  node->support = n;
  node->left = build_tree(t, ctx, left_rows, depth + 1);
  node->right = build_tree(t, ctx, right_rows, depth + 1);
  return node;
}

void check_not_empty(const TrainingData& data) {
  if (data.x.empty()) throw EmptyDataset();
}

std::size_t count_positives(const TrainingData& data) {
  std::size_t pos = 0;
  for (auto y : data.y) pos += y;
  return pos;
}

void check_two_classes(const TrainingData& data) {
  const std::size_t pos = count_positives(data);
  if (pos == 0 || pos == data.x.size()) throw DegenerateLabels();
}

double logistic_loss(std::span<const double> p, std::span<const std::uint8_t> y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    loss -= y[i] != 0 ? std::log(p[i]) : std::log(1.0 - p[i]);
  }
  return loss / static_cast<double>(p.size());
}

const std::vector<std::unique_ptr<TreeNode>>* model_trees(const FeedbackModel& model) {
  switch (model.kind) {
    case ModelKind::kRf: return &std::get<RfParams>(model.params).trees;
    case ModelKind::kGbdt: return &std::get<GbdtParams>(model.params).trees;
    default: return nullptr;
  }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBaseline: return "baseline";
    case ModelKind::kLr: return "lr";
    case ModelKind::kDt: return "dt";
    case ModelKind::kRf: return "rf";
    case ModelKind::kGbdt: return "gbdt";
  }
  return "baseline";
}

std::unique_ptr<TreeNode> clone_tree(const TreeNode* node) {
  if (node == nullptr) return nullptr;
  auto copy = std::make_unique<TreeNode>();
  copy->feature = node->feature;
  copy->threshold = node->threshold;
  copy->value = node->value;
  copy->support = node->support;
  copy->left = clone_tree(node->left.get());
  copy->right = clone_tree(node->right.get());
  return copy;
}

FeedbackModel FeedbackModel::clone() const {
  FeedbackModel copy;
  copy.kind = kind;
  copy.feature_order_version = feature_order_version;
  copy.n_features = n_features;
  copy.seed = seed;
  copy.hyperparameters = hyperparameters;
  copy.loss_trace = loss_trace;
  copy.feature_gain = feature_gain;
  std::visit(
      [&copy](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DtParams>) {
          copy.params = DtParams{clone_tree(p.root.get())};
        } else if constexpr (std::is_same_v<T, RfParams>) {
          RfParams out;
          out.bootstrap = p.bootstrap;
          out.feature_subsample = p.feature_subsample;
          out.tree_seeds = p.tree_seeds;
          for (const auto& tree : p.trees) out.trees.push_back(clone_tree(tree.get()));
          copy.params = std::move(out);
        } else if constexpr (std::is_same_v<T, GbdtParams>) {
          GbdtParams out;
          out.learning_rate = p.learning_rate;
          out.base_score = p.base_score;
          for (const auto& tree : p.trees) out.trees.push_back(clone_tree(tree.get()));
          copy.params = std::move(out);
        } else {
          copy.params = p;
        }
      },
      params);
  return copy;
}

TrainingData behavior_training_data(std::span<const FeedbackDatasetRow> rows) {
  TrainingData data;
  data.feature_order_version = std::string(kBehaviorOrderVersion);
  data.n_features = kBehaviorFeatureCount;
  data.x.reserve(rows.size());
  data.y.reserve(rows.size());
  for (const auto& row : rows) {
    data.x.emplace_back(row.features.values.begin(), row.features.values.end());
    data.y.push_back(row.label ? 1 : 0);
  }
  return data;
}

FeedbackModel train_baseline(std::span<const FeedbackDatasetRow> rows, int feature_index) {
  return train_baseline(behavior_training_data(rows), feature_index);
}

FeedbackModel train_baseline(const TrainingData& data, int feature_index) {
  check_not_empty(data);
  if (feature_index < 0 || static_cast<std::size_t>(feature_index) >= data.n_features) {
    throw BadFeatureIndex(feature_index);
  }
  BaselineParams params;
  params.feature_index = feature_index;
  params.min_value = data.x[0][static_cast<std::size_t>(feature_index)];
  params.max_value = params.min_value;
  for (const auto& x : data.x) {
    const double v = x[static_cast<std::size_t>(feature_index)];
    params.min_value = std::min(params.min_value, v);
    params.max_value = std::max(params.max_value, v);
  }
  FeedbackModel model;
  model.kind = ModelKind::kBaseline;
  model.feature_order_version = data.feature_order_version;
  model.n_features = data.n_features;
  model.params = params;
  model.hyperparameters["feature_index"] = feature_index;
  return model;
}

FeedbackModel train_lr(std::span<const FeedbackDatasetRow> rows, const LrOptions& opts) {
  return train_lr(behavior_training_data(rows), opts);
}

FeedbackModel train_lr(const TrainingData& data, const LrOptions& opts) {
  check_not_empty(data);
  check_two_classes(data);
  const std::size_t n = data.x.size();
  const std::size_t d = data.n_features;

  LrParams params;
  params.mean.assign(d, 0.0);
  params.stddev.assign(d, 1.0);
  for (const auto& x : data.x) {
    for (std::size_t f = 0; f < d; ++f) params.mean[f] += x[f];
  }
  for (std::size_t f = 0; f < d; ++f) params.mean[f] /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& x : data.x) {
    for (std::size_t f = 0; f < d; ++f) {
      const double c = x[f] - params.mean[f];
      var[f] += c * c;
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    const double sd = std::sqrt(var[f] / static_cast<double>(n));
    params.stddev[f] = sd > 0.0 ? sd : 1.0;
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      z[i][f] = (data.x[i][f] - params.mean[f]) / params.stddev[f];
    }
  }

  params.weights.assign(d, 0.0);
  params.bias = 0.0;
  std::vector<double> p(n);
  std::vector<double> grad(d);

  auto forward = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double logit = params.bias;
      for (std::size_t f = 0; f < d; ++f) logit += params.weights[f] * z[i][f];
      p[i] = sigmoid(logit);
    }
  };
  auto regularized_loss = [&] {
    double l = logistic_loss(p, data.y);
    for (double w : params.weights) l += 0.5 * opts.l2 * w * w;
    return l;
  };

  std::vector<double> trace;
  trace.reserve(opts.epochs + 1);
  forward();
  trace.push_back(regularized_loss());

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = p[i] - static_cast<double>(data.y[i]);
      for (std::size_t f = 0; f < d; ++f) grad[f] += err * z[i][f];
      grad_bias += err;
    }
    for (std::size_t f = 0; f < d; ++f) {
      params.weights[f] -= opts.learning_rate * (grad[f] / static_cast<double>(n) +
                                                 opts.l2 * params.weights[f]);
    }
    params.bias -= opts.learning_rate * grad_bias / static_cast<double>(n);
    forward();
    trace.push_back(regularized_loss());
  }

  FeedbackModel model;
  model.kind = ModelKind::kLr;
  model.feature_order_version = data.feature_order_version;
  model.n_features = d;
  model.params = std::move(params);
  model.seed = opts.seed;
  model.hyperparameters["epochs"] = static_cast<double>(opts.epochs);
  model.hyperparameters["learning_rate"] = opts.learning_rate;
  model.hyperparameters["l2"] = opts.l2;
  model.loss_trace = std::move(trace);
  return model;
}

FeedbackModel train_dt(std::span<const FeedbackDatasetRow> rows, const DtOptions& opts) {
  return train_dt(behavior_training_data(rows), opts);
}

FeedbackModel train_dt(const TrainingData& data, const DtOptions& opts) {
  check_not_empty(data);
  std::vector<double> target(data.y.begin(), data.y.end());
  std::vector<std::size_t> rows(data.x.size());
  std::iota(rows.begin(), rows.end(), 0);

  std::vector<double> gain(data.n_features, 0.0);
  TreeTargets targets{data.x, target, {}, 0.0};
  BuildContext ctx;
  ctx.max_depth = opts.max_depth;
  ctx.min_leaf = std::max<std::size_t>(opts.min_leaf, 1);
  ctx.n_features = data.n_features;
  ctx.gain_accum = &gain;

  FeedbackModel model;
  model.kind = ModelKind::kDt;
  model.feature_order_version = data.feature_order_version;
  model.n_features = data.n_features;
  model.params = DtParams{build_tree(targets, ctx, rows, 0)};
  model.seed = opts.seed;
  model.hyperparameters["max_depth"] = static_cast<double>(opts.max_depth);
  model.hyperparameters["min_leaf"] = static_cast<double>(opts.min_leaf);
  model.feature_gain = std::move(gain);
  return model;
}

FeedbackModel train_rf(std::span<const FeedbackDatasetRow> rows, const RfOptions& opts) {
  return train_rf(behavior_training_data(rows), opts);
}

FeedbackModel train_rf(const TrainingData& data, const RfOptions& opts) {
  check_not_empty(data);
  if (opts.n_trees == 0) throw ConfigError("random forest needs n_trees >= 1");
  const std::size_t d = data.n_features;
  const std::size_t subsample =
      opts.feature_subsample > 0
          ? std::min(opts.feature_subsample, d)
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

  std::vector<double> target(data.y.begin(), data.y.end());
  TreeTargets targets{data.x, target, {}, 0.0};

  RfParams params;
  params.bootstrap = opts.bootstrap;
  params.feature_subsample = subsample;
  params.trees.resize(opts.n_trees);
  params.tree_seeds.resize(opts.n_trees);
  for (std::size_t t = 0; t < opts.n_trees; ++t) {
    params.tree_seeds[t] = derive_seed(opts.seed, t);
  }
  std::vector<std::vector<double>> tree_gains(opts.n_trees);

  auto fit_tree = [&](std::size_t t) {
    Rng rng(params.tree_seeds[t]);
    std::vector<std::size_t> rows_t(data.x.size());
    if (opts.bootstrap) {
      for (auto& r : rows_t) r = static_cast<std::size_t>(rng.uniform_below(data.x.size()));
    } else {
      std::iota(rows_t.begin(), rows_t.end(), 0);
    }
    tree_gains[t].assign(d, 0.0);
    BuildContext ctx;
    ctx.max_depth = opts.max_depth;
    ctx.min_leaf = std::max<std::size_t>(opts.min_leaf, 1);
    ctx.n_features = d;
    ctx.feature_subsample = subsample;
    ctx.rng = &rng;
    ctx.gain_accum = &tree_gains[t];
    params.trees[t] = build_tree(targets, ctx, rows_t, 0);
  };

  const unsigned workers = std::min<unsigned>(worker_threads(), opts.n_trees);
  if (workers <= 1) {
    for (std::size_t t = 0; t < opts.n_trees; ++t) fit_tree(t);
  } else {
    // Trees depend only on their derived seed, so the result is
    // order-independent and identical to the sequential run.
    std::vector<std::future<void>> futures;
    for (unsigned w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t t = w; t < opts.n_trees; t += workers) fit_tree(t);
      }));
    }
    for (auto& f : futures) f.get();
  }

  std::vector<double> gain(d, 0.0);
  for (const auto& tg : tree_gains) {
    for (std::size_t f = 0; f < d; ++f) gain[f] += tg[f];
  }

  FeedbackModel model;
  model.kind = ModelKind::kRf;
  model.feature_order_version = data.feature_order_version;
  model.n_features = d;
  model.params = std::move(params);
  model.seed = opts.seed;
  model.hyperparameters["n_trees"] = static_cast<double>(opts.n_trees);
  model.hyperparameters["max_depth"] = static_cast<double>(opts.max_depth);
  model.hyperparameters["min_leaf"] = static_cast<double>(opts.min_leaf);
  model.hyperparameters["feature_subsample"] = static_cast<double>(subsample);
  model.hyperparameters["bootstrap"] = opts.bootstrap ? 1.0 : 0.0;
  model.feature_gain = std::move(gain);
  return model;
}

FeedbackModel train_gbdt(std::span<const FeedbackDatasetRow> rows, const GbdtOptions& opts) {
  return train_gbdt(behavior_training_data(rows), opts);
}

FeedbackModel train_gbdt(const TrainingData& data, const GbdtOptions& opts) {
  check_not_empty(data);
  check_two_classes(data);
  const std::size_t n = data.x.size();
  const std::size_t d = data.n_features;
  const double pos_rate = static_cast<double>(count_positives(data)) / static_cast<double>(n);

  GbdtParams params;
  params.learning_rate = opts.learning_rate;
  params.base_score = std::log(pos_rate / (1.0 - pos_rate));

  std::vector<double> score(n, params.base_score);
  std::vector<double> p(n), residual(n), hess(n);
  std::vector<double> gain(d, 0.0);
  std::vector<double> trace;
  trace.reserve(opts.n_trees + 1);

  auto refresh = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = sigmoid(score[i]);
      residual[i] = static_cast<double>(data.y[i]) - p[i];
      hess[i] = p[i] * (1.0 - p[i]);
    }
  };
  refresh();
  trace.push_back(logistic_loss(p, data.y));

  TreeTargets targets{data.x, residual, hess, opts.l2_leaf};
  for (std::size_t round = 0; round < opts.n_trees; ++round) {
    std::vector<std::size_t> rows_t(n);
    std::iota(rows_t.begin(), rows_t.end(), 0);
    BuildContext ctx;
    ctx.max_depth = opts.max_depth;
    ctx.min_leaf = std::max<std::size_t>(opts.min_leaf, 1);
    ctx.n_features = d;
    ctx.gain_accum = &gain;
    auto tree = build_tree(targets, ctx, rows_t, 0);
    for (std::size_t i = 0; i < n; ++i) {
      score[i] += opts.learning_rate * tree_eval(tree.get(), data.x[i]);
    }
    params.trees.push_back(std::move(tree));
    refresh();
    trace.push_back(logistic_loss(p, data.y));
  }

  FeedbackModel model;
  model.kind = ModelKind::kGbdt;
  model.feature_order_version = data.feature_order_version;
  model.n_features = d;
  model.params = std::move(params);
  model.seed = opts.seed;
  model.hyperparameters["n_trees"] = static_cast<double>(opts.n_trees);
  model.hyperparameters["learning_rate"] = opts.learning_rate;
  model.hyperparameters["max_depth"] = static_cast<double>(opts.max_depth);
  model.hyperparameters["min_leaf"] = static_cast<double>(opts.min_leaf);
  model.hyperparameters["l2_leaf"] = opts.l2_leaf;
  model.loss_trace = std::move(trace);
  model.feature_gain = std::move(gain);
  return model;
}

double predict_raw(const FeedbackModel& model, std::span<const double> features) {
  if (features.size() != model.n_features) {
    throw FeatureOrderMismatch(model.feature_order_version,
                               "vector of dimension " + std::to_string(features.size()));
  }
  switch (model.kind) {
    case ModelKind::kBaseline: {
      const auto& p = std::get<BaselineParams>(model.params);
      if (p.max_value == p.min_value) return 0.5;
      const double scaled = (features[static_cast<std::size_t>(p.feature_index)] - p.min_value) /
                            (p.max_value - p.min_value);
      return std::clamp(scaled, 0.0, 1.0);
    }
    case ModelKind::kLr: {
      const auto& p = std::get<LrParams>(model.params);
      double logit = p.bias;
      for (std::size_t f = 0; f < model.n_features; ++f) {
        logit += p.weights[f] * (features[f] - p.mean[f]) / p.stddev[f];
      }
      return sigmoid(logit);
    }
    case ModelKind::kDt: {
      return tree_eval(std::get<DtParams>(model.params).root.get(), features);
    }
    case ModelKind::kRf: {
      const auto& p = std::get<RfParams>(model.params);
      double sum = 0.0;
      for (const auto& tree : p.trees) sum += tree_eval(tree.get(), features);
      return sum / static_cast<double>(p.trees.size());
    }
    case ModelKind::kGbdt: {
      const auto& p = std::get<GbdtParams>(model.params);
      double score = p.base_score;
      for (const auto& tree : p.trees) score += p.learning_rate * tree_eval(tree.get(), features);
      return sigmoid(score);
    }
  }
  throw UnsupportedModel("unknown model kind");
}

double predict(const FeedbackModel& model, const BehaviorFeatures& features) {
  if (model.feature_order_version != kBehaviorOrderVersion) {
    throw FeatureOrderMismatch(model.feature_order_version, std::string(kBehaviorOrderVersion));
  }
  return predict_raw(model, features.values);
}

bool predict_label_aggregated(const FeedbackModel& model,
                              std::span<const ImpressionSignals> impressions) {
  if (model.feature_order_version != kImpressionOrderVersion) {
    throw FeatureOrderMismatch(model.feature_order_version, std::string(kImpressionOrderVersion));
  }
  if (impressions.empty()) throw EmptyGroup();
  double sum = 0.0;
  for (const auto& impression : impressions) {
    sum += predict_raw(model, impression_vector(impression));
  }
  return sum / static_cast<double>(impressions.size()) >= 0.5;
}

std::vector<std::pair<std::size_t, double>> feature_importance(const FeedbackModel& model) {
  if (model.kind == ModelKind::kBaseline || model.kind == ModelKind::kLr) {
    throw UnsupportedModel(std::string("feature importance needs a tree model, got ") +
                           std::string(model_kind_name(model.kind)));
  }
  double total = 0.0;
  for (double g : model.feature_gain) total += g;
  std::vector<std::pair<std::size_t, double>> ranked;
  ranked.reserve(model.feature_gain.size());
  for (std::size_t f = 0; f < model.feature_gain.size(); ++f) {
    ranked.emplace_back(f, total > 0.0 ? model.feature_gain[f] / total : 0.0);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

namespace {

std::span<const std::string_view> feature_names_for(const FeedbackModel& model) {
  if (model.feature_order_version == kBehaviorOrderVersion) return behavior_feature_names();
  if (model.feature_order_version == kImpressionOrderVersion) return impression_feature_names();
  return {};
}

void collect_rules(const TreeNode* node, std::span<const std::string_view> names,
                   double min_purity, std::string& path, std::vector<std::string>& rules) {
  if (node->is_leaf()) {
    const double purity = std::max(node->value, 1.0 - node->value);
    if (purity < min_purity) return;
    std::string rule = path.empty() ? "always" : path;
    rule += " -> ";
    rule += node->value >= 0.5 ? "relevant" : "irrelevant";
    rule += " (purity=" + format_fixed(purity, 4) + ", support=" + std::to_string(node->support) + ")";
    rules.push_back(std::move(rule));
    return;
  }
  const std::size_t f = static_cast<std::size_t>(node->feature);
  const std::string name =
      f < names.size() ? std::string(names[f]) : "f" + std::to_string(f);
  const std::size_t saved = path.size();

  if (!path.empty()) path += " && ";
  path += name + " < " + format_double(node->threshold);
  collect_rules(node->left.get(), names, min_purity, path, rules);
  path.resize(saved);

  if (!path.empty()) path += " && ";
  path += name + " >= " + format_double(node->threshold);
  collect_rules(node->right.get(), names, min_purity, path, rules);
  path.resize(saved);
}

}  // namespace

std::vector<std::string> extract_rules(const FeedbackModel& model, double min_leaf_purity) {
  if (model.kind != ModelKind::kDt) {
    throw UnsupportedModel("rule extraction is defined for decision trees");
  }
  std::vector<std::string> rules;
  std::string path;
  collect_rules(std::get<DtParams>(model.params).root.get(), feature_names_for(model),
                min_leaf_purity, path, rules);
  return rules;
}

namespace {

json tree_to_json(const TreeNode* node) {
  if (node->is_leaf()) {
    return json{{"support", node->support}, {"value", node->value}};
  }
  return json{{"feature", node->feature},
              {"threshold", node->threshold},
              {"left", tree_to_json(node->left.get())},
              {"right", tree_to_json(node->right.get())}};
}

std::unique_ptr<TreeNode> tree_from_json(const json& doc) {
  auto node = std::make_unique<TreeNode>();
  if (doc.contains("feature")) {
    node->feature = doc.at("feature").get<int>();
    node->threshold = doc.at("threshold").get<double>();
    node->left = tree_from_json(doc.at("left"));
    node->right = tree_from_json(doc.at("right"));
  } else {
    node->value = doc.at("value").get<double>();
    node->support = doc.at("support").get<std::size_t>();
  }
  return node;
}

}  // namespace

std::string model_to_json(const FeedbackModel& model) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = std::string(model_kind_name(model.kind));
  doc["feature_order_version"] = model.feature_order_version;
  doc["n_features"] = model.n_features;
  doc["seed"] = model.seed;
  doc["hyperparameters"] = model.hyperparameters;
  if (!model.loss_trace.empty()) doc["loss_trace"] = model.loss_trace;
  if (!model.feature_gain.empty()) doc["feature_gain"] = model.feature_gain;

  json params;
  switch (model.kind) {
    case ModelKind::kBaseline: {
      const auto& p = std::get<BaselineParams>(model.params);
      params = {{"feature_index", p.feature_index}, {"min", p.min_value}, {"max", p.max_value}};
      break;
    }
    case ModelKind::kLr: {
      const auto& p = std::get<LrParams>(model.params);
      params = {{"weights", p.weights}, {"bias", p.bias}, {"mean", p.mean}, {"stddev", p.stddev}};
      break;
    }
    case ModelKind::kDt: {
      params = {{"tree", tree_to_json(std::get<DtParams>(model.params).root.get())}};
      break;
    }
    case ModelKind::kRf: {
      const auto& p = std::get<RfParams>(model.params);
      json trees = json::array();
      for (const auto& tree : p.trees) trees.push_back(tree_to_json(tree.get()));
      params = {{"trees", std::move(trees)},
                {"tree_seeds", p.tree_seeds},
                {"bootstrap", p.bootstrap},
                {"feature_subsample", p.feature_subsample}};
      break;
    }
    case ModelKind::kGbdt: {
      const auto& p = std::get<GbdtParams>(model.params);
      json trees = json::array();
      for (const auto& tree : p.trees) trees.push_back(tree_to_json(tree.get()));
      params = {{"trees", std::move(trees)},
                {"learning_rate", p.learning_rate},
                {"base_score", p.base_score}};
      break;
    }
  }
  doc["params"] = std::move(params);
  return doc.dump(2) + "\n";
}

FeedbackModel model_from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw IoError("model file: not a JSON object");
  if (doc.value("format_version", 0) != 1) throw IoError("model file: unsupported format_version");

  FeedbackModel model;
  const std::string kind = doc.at("kind").get<std::string>();
  model.feature_order_version = doc.at("feature_order_version").get<std::string>();
  model.n_features = doc.at("n_features").get<std::size_t>();
  model.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("hyperparameters")) {
    model.hyperparameters = doc.at("hyperparameters").get<std::map<std::string, double>>();
  }
  if (doc.contains("loss_trace")) model.loss_trace = doc.at("loss_trace").get<std::vector<double>>();
  if (doc.contains("feature_gain")) {
    model.feature_gain = doc.at("feature_gain").get<std::vector<double>>();
  }

  const json& params = doc.at("params");
  if (kind == "baseline") {
    model.kind = ModelKind::kBaseline;
    model.params = BaselineParams{params.at("feature_index").get<int>(),
                                  params.at("min").get<double>(), params.at("max").get<double>()};
  } else if (kind == "lr") {
    model.kind = ModelKind::kLr;
    LrParams p;
    p.weights = params.at("weights").get<std::vector<double>>();
    p.bias = params.at("bias").get<double>();
    p.mean = params.at("mean").get<std::vector<double>>();
    p.stddev = params.at("stddev").get<std::vector<double>>();
    model.params = std::move(p);
  } else if (kind == "dt") {
    model.kind = ModelKind::kDt;
    model.params = DtParams{tree_from_json(params.at("tree"))};
  } else if (kind == "rf") {
    model.kind = ModelKind::kRf;
    RfParams p;
    for (const auto& tree : params.at("trees")) p.trees.push_back(tree_from_json(tree));
    p.tree_seeds = params.at("tree_seeds").get<std::vector<std::uint64_t>>();
    p.bootstrap = params.at("bootstrap").get<bool>();
    p.feature_subsample = params.at("feature_subsample").get<std::size_t>();
    model.params = std::move(p);
  } else if (kind == "gbdt") {
    model.kind = ModelKind::kGbdt;
    GbdtParams p;
    for (const auto& tree : params.at("trees")) p.trees.push_back(tree_from_json(tree));
    p.learning_rate = params.at("learning_rate").get<double>();
    p.base_score = params.at("base_score").get<double>();
    model.params = std::move(p);
  } else {
    throw IoError("model file: unknown kind \"" + kind + "\"");
  }
  return model;
}

void save_model(const FeedbackModel& model, const std::filesystem::path& path) {
  write_file(path, model_to_json(model));
}

FeedbackModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_file(path));
}

SplitIndices split_701010(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c6974ULL));  // "split" stream
  rng.shuffle(order);

  const std::size_t dev = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 9.0));
  const std::size_t test = dev;
  const std::size_t train = n - std::min(n, dev + test);

  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + train);
  split.dev.assign(order.begin() + train, order.begin() + std::min(n, train + dev));
  split.test.assign(order.begin() + std::min(n, train + dev), order.end());
  return split;
}

}  // namespace qamine
