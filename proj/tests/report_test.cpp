#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "support.hpp"

using namespace mric;
using mric::fixtures::slurp;
using mric::fixtures::TempDir;

TEST(Report, ConfusionCsvLayoutAndRoundTrip) {
  const ConfusionMatrix m{178, 16, 711, 1};
  const std::string csv = confusion_csv(m);
  EXPECT_EQ(csv, "actual\\predicted,tumor,healthy\ntumor,178,1\nhealthy,16,711\n");
  EXPECT_EQ(parse_confusion_csv(csv), m);
}

TEST(Report, CurvesCsvRoundTrip) {
  std::vector<EpochStats> c = {{1, 0.69314718, 0.5, 0.7, 0.25}, {2, 0.1, 1.0 / 3.0, 0.2, 0.75}};
  const auto back = parse_curves_csv(curves_csv(c));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].epoch, 2u);
  EXPECT_NEAR(back[1].train_acc, 1.0 / 3.0, 1e-9);
  EXPECT_THROW(parse_curves_csv("h\n1,2\n"), ValueError);
}

TEST(Report, EmitsAllFiles) {
  TempDir dir;
  const std::vector<Prediction> preds = {{0.9, 1}, {0.6, 0}, {0.4, 1}, {0.1, 0}};
  const auto r = make_report(preds, {{1, 0.6, 0.5, 0.7, 0.5}, {2, 0.4, 0.75, 0.5, 0.5}});
  emit_report(r, dir.path() / "out");
  for (const char* f : {"metrics.json", "confusion.csv", "curves.csv", "roc.csv", "scores.txt", "curves.svg", "roc.svg"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "out" / f)) << f;
  }
  const auto j = nlohmann::json::parse(slurp(dir.path() / "out/metrics.json"));
  EXPECT_EQ(j["samples"], 4);
  EXPECT_DOUBLE_EQ(j["precision"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 0.75);
  EXPECT_EQ(slurp(dir.path() / "out/roc.csv").substr(0, 25), "threshold,fpr,tpr\ninf,0,0");
  EXPECT_NE(slurp(dir.path() / "out/scores.txt").find("Specificity         0.5000"), std::string::npos);
  EXPECT_NE(slurp(dir.path() / "out/curves.svg").find("<svg"), std::string::npos);
}

TEST(Report, SingleClassLeavesAucUndefined) {
  TempDir dir;
  const auto r = make_report({{0.9, 1}, {0.2, 1}});
  EXPECT_FALSE(r.auc);
  EXPECT_TRUE(r.roc.empty());
  emit_report(r, dir.path());
  const auto j = nlohmann::json::parse(slurp(dir / "metrics.json"));
  EXPECT_TRUE(j["auc"].is_null());
  EXPECT_TRUE(j["specificity"].is_null());
  EXPECT_NE(slurp(dir / "scores.txt").find("undefined"), std::string::npos);
}
