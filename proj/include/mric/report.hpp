#pragma once

// Evaluation report files: metrics.json, confusion.csv, curves.csv, roc.csv,
// scores.txt and SVG renderings of the curves and the ROC.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mric/metrics.hpp"
#include "mric/train.hpp"

namespace mric {

namespace fs = std::filesystem;

struct EvalReport {
  ConfusionMatrix matrix;
  Metrics metrics;
  std::optional<double> auc;
  double threshold = 0.5;
  std::vector<RocPoint> roc;
  std::vector<EpochStats> curves;
};

/// Confusion matrix, metrics and ROC of a prediction list.
inline EvalReport make_report(const std::vector<Prediction>& preds, std::vector<EpochStats> curves = {},
                              double threshold = 0.5) {
  EvalReport r;
  r.threshold = threshold;
  r.matrix = confusion(preds, threshold);
  r.metrics = compute_metrics(r.matrix);
  bool pos = false, neg = false;
  for (const auto& p : preds) (p.label == 1 ? pos : neg) = true;
  if (pos && neg) {
    r.roc = roc_curve(preds);
    r.auc = roc_auc(preds);
  }
  r.curves = std::move(curves);
  return r;
}

/// Nine significant digits, the CSV number format.
inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace detail {

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

// One chart with axes from (x0, y0) to (x1, y1) in data space.
inline std::string svg_chart(const std::string& title, const std::vector<Series>& series, double x0,
                             double x1, double y0, double y1, double ox, double oy) {
  constexpr double kW = 360, kH = 240;
  auto px = [&](double x) { return ox + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.0) * kW; };
  auto py = [&](double y) { return oy + kH - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.0) * kH; };
  std::ostringstream s;
  s << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << kW << "\" height=\"" << kH
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  s << "<text x=\"" << ox + kW / 2 << "\" y=\"" << oy - 8 << "\" text-anchor=\"middle\">" << title
    << "</text>\n";
  s << "<text x=\"" << ox - 4 << "\" y=\"" << oy + kH << "\" text-anchor=\"end\">" << format_g9(y0)
    << "</text>\n";
  s << "<text x=\"" << ox - 4 << "\" y=\"" << oy + 10 << "\" text-anchor=\"end\">" << format_g9(y1)
    << "</text>\n";
  s << "<text x=\"" << ox << "\" y=\"" << oy + kH + 14 << "\">" << format_g9(x0) << "</text>\n";
  s << "<text x=\"" << ox + kW << "\" y=\"" << oy + kH + 14 << "\" text-anchor=\"end\">"
    << format_g9(x1) << "</text>\n";
  double legend_y = oy + 14;
  for (const auto& ser : series) {
    s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : ser.points) s << px(x) << "," << py(y) << " ";
    s << "\"/>\n";
    s << "<text x=\"" << ox + kW - 6 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\""
      << ser.color << "\">" << ser.label << "</text>\n";
    legend_y += 14;
  }
  return s.str();
}

inline std::string svg_document(double w, double h, const std::string& body) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << body << "</svg>\n";
  return s.str();
}

}  // namespace detail

inline std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream s;
  s << "actual\\predicted,tumor,healthy\n";
  s << "tumor," << m.tp << "," << m.fn << "\n";
  s << "healthy," << m.fp << "," << m.tn << "\n";
  return s.str();
}

inline ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header, tumor, healthy;
  std::getline(in, header);
  std::getline(in, tumor);
  std::getline(in, healthy);
  auto cells = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) out.push_back(c);
    if (out.size() != 3) throw ValueError("malformed confusion row: " + line);
    return out;
  };
  const auto t = cells(tumor), h = cells(healthy);
  ConfusionMatrix m;
  m.tp = std::stoull(t[1]);
  m.fn = std::stoull(t[2]);
  m.fp = std::stoull(h[1]);
  m.tn = std::stoull(h[2]);
  return m;
}

inline std::string curves_csv(const std::vector<EpochStats>& curves) {
  std::ostringstream s;
  s << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : curves) {
    s << e.epoch << "," << format_g9(e.train_loss) << "," << format_g9(e.train_acc) << ","
      << format_g9(e.val_loss) << "," << format_g9(e.val_acc) << "\n";
  }
  return s.str();
}

inline std::vector<EpochStats> parse_curves_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<EpochStats> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochStats e;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &e.epoch, &e.train_loss, &e.train_acc,
                    &e.val_loss, &e.val_acc) != 5) {
      throw ValueError("malformed curves row: " + line);
    }
    out.push_back(e);
  }
  return out;
}

inline std::string metrics_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.matrix.total();
  j["threshold"] = r.threshold;
  j["confusion"] = {{"tp", r.matrix.tp}, {"fp", r.matrix.fp}, {"tn", r.matrix.tn}, {"fn", r.matrix.fn}};
  j["precision"] = detail::opt_json(r.metrics.precision);
  j["recall"] = detail::opt_json(r.metrics.recall);
  j["f1"] = detail::opt_json(r.metrics.f1);
  j["specificity"] = detail::opt_json(r.metrics.specificity);
  j["accuracy"] = detail::opt_json(r.metrics.accuracy);
  j["auc"] = detail::opt_json(r.auc);
  return j.dump(2) + "\n";
}

/// Score table: one row per metric, "undefined" for empty metrics.
inline std::string scores_table(const EvalReport& r) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::ostringstream s;
  s << "Evaluation Metrics  Achieved Scores\n";
  s << "Precision           " << cell(r.metrics.precision) << "\n";
  s << "Recall              " << cell(r.metrics.recall) << "\n";
  s << "F1-Score            " << cell(r.metrics.f1) << "\n";
  s << "Specificity         " << cell(r.metrics.specificity) << "\n";
  s << "Accuracy            " << cell(r.metrics.accuracy) << "\n";
  s << "AUC                 " << cell(r.auc) << "\n";
  return s.str();
}

inline void emit_report(const EvalReport& r, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  detail::write_file(out_dir / "metrics.json", metrics_json(r));
  detail::write_file(out_dir / "confusion.csv", confusion_csv(r.matrix));
  detail::write_file(out_dir / "curves.csv", curves_csv(r.curves));
  detail::write_file(out_dir / "scores.txt", scores_table(r));

  {
    std::ostringstream s;
    s << "threshold,fpr,tpr\n";
    for (const auto& p : r.roc) {
      s << (std::isinf(p.threshold) ? std::string("inf") : format_g9(p.threshold)) << ","
        << format_g9(p.fpr) << "," << format_g9(p.tpr) << "\n";
    }
    detail::write_file(out_dir / "roc.csv", s.str());
  }

  {
    detail::Series tr_acc{"train accuracy", "#1f77b4", {}}, va_acc{"validation accuracy", "#d62728", {}};
    detail::Series tr_loss{"train loss", "#1f77b4", {}}, va_loss{"validation loss", "#d62728", {}};
    double max_loss = 0.0;
    for (const auto& e : r.curves) {
      const auto x = static_cast<double>(e.epoch);
      tr_acc.points.emplace_back(x, e.train_acc);
      va_acc.points.emplace_back(x, e.val_acc);
      tr_loss.points.emplace_back(x, e.train_loss);
      va_loss.points.emplace_back(x, e.val_loss);
      max_loss = std::max({max_loss, e.train_loss, e.val_loss});
    }
    const double last = r.curves.empty() ? 1.0 : static_cast<double>(r.curves.back().epoch);
    std::string body = detail::svg_chart("Training and Validation Accuracy", {tr_acc, va_acc}, 1.0,
                                         last, 0.0, 1.0, 50, 30);
    body += detail::svg_chart("Training and Validation Loss", {tr_loss, va_loss}, 1.0, last, 0.0,
                              max_loss > 0 ? max_loss : 1.0, 470, 30);
    detail::write_file(out_dir / "curves.svg", detail::svg_document(860, 300, body));
  }
  {
    detail::Series roc{"ROC", "#d62728", {}}, chance{"chance", "#999999", {{0, 0}, {1, 1}}};
    for (const auto& p : r.roc) roc.points.emplace_back(p.fpr, p.tpr);
    const std::string title = r.auc ? "ROC (AUC = " + format_g9(*r.auc) + ")" : "ROC (undefined)";
    detail::write_file(out_dir / "roc.svg",
                       detail::svg_document(440, 300, detail::svg_chart(title, {roc, chance}, 0, 1, 0, 1, 50, 30)));
  }
}

}  // namespace mric
