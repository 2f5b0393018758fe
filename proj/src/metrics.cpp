#include "qamine/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "qamine/error.hpp"

namespace qamine {

double auc(std::span<const ScoredLabel> items) {
  std::size_t n_pos = 0;
  for (const auto& item : items) n_pos += item.label;
  const std::size_t n_neg = items.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateLabels();

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return items[a].score < items[b].score; });

  // Sum of average ranks (1-based) over positives.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && items[order[j]].score == items[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (items[order[k]].label) rank_sum_pos += avg_rank;
    }
    i = j;
  }

  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AccF1 acc_f1(std::span<const ScoredLabel> items, double threshold) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& item : items) {
    const bool predicted = item.score >= threshold;
    if (predicted && item.label) ++tp;
    else if (predicted) ++fp;
    else if (item.label) ++fn;
    else ++tn;
  }
  AccF1 out;
  out.acc = items.empty() ? 0.0
                          : static_cast<double>(tp + tn) / static_cast<double>(items.size());
  const double p_den = static_cast<double>(tp + fp);
  const double r_den = static_cast<double>(tp + fn);
  const double precision = p_den == 0.0 ? 0.0 : static_cast<double>(tp) / p_den;
  const double recall = r_den == 0.0 ? 0.0 : static_cast<double>(tp) / r_den;
  out.f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  return out;
}

PRCurve pr_curve(std::span<const ScoredLabel> items) {
  std::size_t n_pos = 0;
  for (const auto& item : items) n_pos += item.label;
  if (n_pos == 0) throw NoPositives();

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return items[a].score > items[b].score; });

  PRCurve curve;
  std::size_t tp = 0, predicted = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = items[order[i]].score;
    std::size_t j = i;
    while (j < order.size() && items[order[j]].score == threshold) {
      tp += items[order[j]].label;
      ++predicted;
      ++j;
    }
    curve.points.push_back(PRPoint{threshold,
                                   static_cast<double>(tp) / static_cast<double>(predicted),
                                   static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return curve;
}

double PRCurve::max_precision() const {
  double best = 0.0;
  for (const auto& point : points) best = std::max(best, point.precision);
  return best;
}

double PRCurve::recall_at_positive_score() const {
  double recall = 0.0;
  for (const auto& point : points) {
    if (point.threshold > 0.0) recall = point.recall;  // points are threshold-descending
  }
  return recall;
}

}  // namespace qamine
