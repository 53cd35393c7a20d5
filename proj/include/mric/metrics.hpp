#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mric/error.hpp"

namespace mric {

/// (probability of tumor, label) with label 1 = tumor.
struct Prediction {
  double probability = 0.0;
  int label = 0;
};

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Positive when probability >= threshold.
inline ConfusionMatrix confusion(const std::vector<Prediction>& preds, double threshold = 0.5) {
  ConfusionMatrix m;
  for (const auto& p : preds) {
    if (p.label != 0 && p.label != 1) throw ValueError("labels must be 0 or 1");
    const bool positive = p.probability >= threshold;
    if (positive) {
      (p.label == 1 ? m.tp : m.fp)++;
    } else {
      (p.label == 1 ? m.fn : m.tn)++;
    }
  }
  return m;
}

/// Metrics with a zero denominator are left empty rather than guessed.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> specificity;
};

inline Metrics compute_metrics(const ConfusionMatrix& m) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics r;
  r.precision = ratio(m.tp, m.tp + m.fp);
  r.recall = ratio(m.tp, m.tp + m.fn);
  r.accuracy = ratio(m.tp + m.tn, m.total());
  r.specificity = ratio(m.tn, m.tn + m.fp);
  if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
    r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  }
  return r;
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// ROC points from (0, 0) to (1, 1), one per distinct score plus the
/// origin. The first point's threshold is +infinity.
inline std::vector<RocPoint> roc_curve(const std::vector<Prediction>& preds) {
  std::size_t pos = 0, neg = 0;
  for (const auto& p : preds) (p.label == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw ValueError("ROC needs both classes present");
  std::vector<Prediction> sorted = preds;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Prediction& a, const Prediction& b) { return a.probability > b.probability; });
  std::vector<RocPoint> pts;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double score = sorted[i].probability;
    for (; i < sorted.size() && sorted[i].probability == score; ++i) {
      (sorted[i].label == 1 ? tp : fp)++;
    }
    pts.push_back({score, static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return pts;
}

/// Trapezoidal area under the ROC curve. Tied scores form one diagonal
/// segment, which counts tied pairs as one half.
inline double roc_auc(const std::vector<Prediction>& preds) {
  const auto pts = roc_curve(preds);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace mric
