#include <gtest/gtest.h>

#include "support.hpp"

using namespace mric;

namespace {

std::vector<Prediction> preds_from(const ConfusionMatrix& m) {
  std::vector<Prediction> p;
  for (std::uint64_t i = 0; i < m.tp; ++i) p.push_back({0.9, 1});
  for (std::uint64_t i = 0; i < m.fn; ++i) p.push_back({0.1, 1});
  for (std::uint64_t i = 0; i < m.fp; ++i) p.push_back({0.7, 0});
  for (std::uint64_t i = 0; i < m.tn; ++i) p.push_back({0.2, 0});
  return p;
}

// Pairwise concordance: P(score_pos > score_neg) + 0.5 P(tie).
double brute_auc(const std::vector<Prediction>& p) {
  double wins = 0, pairs = 0;
  for (const auto& a : p) {
    if (a.label != 1) continue;
    for (const auto& b : p) {
      if (b.label != 0) continue;
      pairs += 1;
      if (a.probability > b.probability) wins += 1;
      if (a.probability == b.probability) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(Confusion, ThresholdIsInclusive) {
  const auto m = confusion({{0.5, 1}, {0.5, 0}, {0.4999, 1}, {0.1, 0}});
  EXPECT_EQ(m, (ConfusionMatrix{1, 1, 1, 1}));
  EXPECT_THROW(confusion({{0.5, 2}}), ValueError);
}

TEST(Metrics, KnownMatrix) {
  const auto r = compute_metrics({8, 2, 85, 5});
  EXPECT_DOUBLE_EQ(*r.precision, 0.8);
  EXPECT_DOUBLE_EQ(*r.recall, 8.0 / 13.0);
  EXPECT_DOUBLE_EQ(*r.specificity, 85.0 / 87.0);
  EXPECT_DOUBLE_EQ(*r.accuracy, 0.93);
  EXPECT_NEAR(*r.f1, 16.0 / 23.0, 1e-15);
}

TEST(Metrics, ZeroDenominatorsAreUndefined) {
  const auto none_positive = compute_metrics({0, 0, 5, 5});
  EXPECT_FALSE(none_positive.precision);
  EXPECT_DOUBLE_EQ(*none_positive.recall, 0.0);
  EXPECT_FALSE(none_positive.f1);
  const auto empty = compute_metrics({});
  EXPECT_FALSE(empty.accuracy);
  EXPECT_FALSE(empty.specificity);
  const auto all_wrong = compute_metrics({0, 3, 0, 4});
  EXPECT_DOUBLE_EQ(*all_wrong.precision, 0.0);
  EXPECT_FALSE(all_wrong.f1);
}

TEST(Metrics, FuzzedMatricesAgreeWithFractions) {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const ConfusionMatrix m{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
    ASSERT_EQ(confusion(preds_from(m)), m);
    const auto r = compute_metrics(m);
    if (m.tp + m.fp) EXPECT_NEAR(*r.precision, double(m.tp) / double(m.tp + m.fp), 1e-12);
    if (m.tp + m.fn) EXPECT_NEAR(*r.recall, double(m.tp) / double(m.tp + m.fn), 1e-12);
    if (m.tn + m.fp) EXPECT_NEAR(*r.specificity, double(m.tn) / double(m.tn + m.fp), 1e-12);
    if (m.tp) EXPECT_NEAR(*r.f1, 2.0 * double(m.tp) / double(2 * m.tp + m.fp + m.fn), 1e-12);
  }
}

TEST(Roc, CurveEndpointsAndMonotone) {
  std::vector<Prediction> p = {{0.9, 1}, {0.8, 0}, {0.8, 1}, {0.3, 0}, {0.1, 1}};
  const auto pts = roc_curve(p);
  EXPECT_TRUE(std::isinf(pts.front().threshold));
  EXPECT_EQ(pts.front().fpr, 0.0);
  EXPECT_EQ(pts.back().fpr, 1.0);
  EXPECT_EQ(pts.back().tpr, 1.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].fpr, pts[i - 1].fpr);
    EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
    EXPECT_LT(pts[i].threshold, pts[i - 1].threshold);
  }
}

TEST(Roc, AucPerfectRandomAndTied) {
  EXPECT_DOUBLE_EQ(roc_auc({{0.9, 1}, {0.8, 1}, {0.2, 0}}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({{0.1, 1}, {0.8, 0}}), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc({{0.5, 1}, {0.5, 0}}), 0.5);
  EXPECT_THROW(roc_auc({{0.5, 1}}), ValueError);
}

TEST(Roc, AucMatchesPairwiseConcordance) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(100);
    std::vector<Prediction> p(n);
    for (auto& x : p) x = {static_cast<double>(rng.below(20)) / 19.0, static_cast<int>(rng.below(2))};
    p[0].label = 1;
    p[1].label = 0;
    EXPECT_NEAR(roc_auc(p), brute_auc(p), 1e-9);
  }
}
