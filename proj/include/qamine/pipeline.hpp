#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qamine/features.hpp"
#include "qamine/io.hpp"
#include "qamine/metrics.hpp"
#include "qamine/models.hpp"
#include "qamine/qa_model.hpp"
#include "qamine/simulator.hpp"
#include "qamine/weak_labels.hpp"

namespace qamine {

/// Hyperparameters for one train-feedback invocation.
struct FeedbackTrainSpec {
  std::string kind = "gbdt";  // lr | dt | rf | gbdt | baseline:<index>
  LrOptions lr;
  DtOptions dt;
  RfOptions rf;
  GbdtOptions gbdt;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  SimConfig sim;                    // labeled set (sim.seed derived from seed)
  std::size_t weak_pool_pairs = 20000;
  AggregationConfig agg;
  FeedbackTrainSpec feedback;
  WeakLabelConfig weak;
  TrainConfig qa_pre = default_pretrain_config();
  TrainConfig qa_fine = default_finetune_config();
  std::size_t qa_finetune_pairs = 500;

  static PipelineConfig from_config(const KeyValueConfig& kv);
};

/// Ordered key=value metrics; becomes the summary report.
struct PipelineReport {
  std::vector<std::pair<std::string, std::string>> items;

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  std::string find(const std::string& key) const;
  std::string to_text(const StageMetadata& meta) const;
};

// Stage functions; the pipeline subcommand is exactly this sequence, and the
// other CLI subcommands call the same functions one at a time.

struct SimulateOutputs {
  std::filesystem::path log;
  std::filesystem::path truth;
  std::filesystem::path gold;
  std::filesystem::path pairs;
};

void stage_simulate(const SimConfig& cfg, const SimulateOutputs& out);

void stage_aggregate(const std::filesystem::path& log_path,
                     const std::filesystem::path& out_path, const AggregationConfig& cfg,
                     std::uint64_t seed);

/// Rows joined from a features TSV and a gold TSV by qp_id (features order).
std::vector<FeedbackDatasetRow> load_feedback_rows(const std::filesystem::path& features_path,
                                                   const std::filesystem::path& gold_path);

FeedbackModel train_feedback_kind(const FeedbackTrainSpec& spec,
                                  std::span<const FeedbackDatasetRow> rows, std::uint64_t seed);

struct FeedbackMetrics {
  double auc = 0.0;
  double acc = 0.0;
  double f1 = 0.0;
};

FeedbackMetrics eval_feedback(const FeedbackModel& model,
                              std::span<const FeedbackDatasetRow> rows);

/// Trains on the 7:1:1 train split, saves the model, returns (train/dev/test)
/// metrics keyed for the report.
PipelineReport stage_train_feedback(const FeedbackTrainSpec& spec,
                                    const std::filesystem::path& features_path,
                                    const std::filesystem::path& gold_path,
                                    const std::filesystem::path& model_out, std::uint64_t seed);

void stage_pr_curve(const FeedbackModel& model, std::span<const FeedbackDatasetRow> rows,
                    const std::filesystem::path& out_path, std::uint64_t seed,
                    const std::vector<std::filesystem::path>& inputs);

struct WeakLabelOutputs {
  std::filesystem::path labels;
  std::filesystem::path discarded;
  std::filesystem::path pairs_out;  // empty: skip the text join
};

struct WeakLabelStats {
  std::size_t kept = 0;
  std::size_t discarded = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Scores every row of the features file, thresholds into weak labels,
/// optionally balances, writes the label TSV and the discard sidecar, and
/// (when pairs paths are given) joins labels with pair text into a QA
/// training pairs file. `emit_scores` writes the raw score as the pair
/// target (the MSE route) instead of the boolean label.
WeakLabelStats stage_weak_label(const FeedbackModel& model,
                                const std::filesystem::path& features_path,
                                const std::filesystem::path& pairs_in,
                                const WeakLabelOutputs& out, const WeakLabelConfig& cfg,
                                bool emit_scores);

TrainTrace stage_train_qa(const std::filesystem::path& pairs_path,
                          const std::filesystem::path& model_in,  // empty: fresh model
                          const std::filesystem::path& model_out, const TrainConfig& cfg,
                          TrainStage target_stage);

QaEvalResult stage_eval_qa(const std::filesystem::path& model_path,
                           const std::filesystem::path& pairs_path);

/// Runs every stage into out_dir and writes summary.txt; returns the report.
PipelineReport run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace qamine
