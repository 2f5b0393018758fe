#pragma once

#include <span>
#include <vector>

namespace qamine {

struct ScoredLabel {
  double score = 0.0;
  bool label = false;
};

/// Mann-Whitney AUC with average-rank tie handling: the fraction of
/// (positive, negative) pairs ranked correctly, counting ties as half.
/// Requires at least one label of each class.
double auc(std::span<const ScoredLabel> items);

struct AccF1 {
  double acc = 0.0;
  double f1 = 0.0;
};

/// Accuracy and F1 at `threshold`, predicting positive when score >= threshold.
/// F1 is 0 when precision + recall is 0.
AccF1 acc_f1(std::span<const ScoredLabel> items, double threshold = 0.5);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// One point per distinct score used as threshold, thresholds strictly
/// decreasing; recall at the last point is 1. Requires >= 1 positive.
struct PRCurve {
  std::vector<PRPoint> points;

  double max_precision() const;
  /// Recall of the point whose threshold is the smallest positive score,
  /// i.e. predicting positive iff score > 0. Returns 0 if no such point.
  double recall_at_positive_score() const;
};

PRCurve pr_curve(std::span<const ScoredLabel> items);

}  // namespace qamine
