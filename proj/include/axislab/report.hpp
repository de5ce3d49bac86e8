#pragma once

// Run reports: canonical JSON, one CSV row per metric block, ROC and
// predicted-vs-measured SVG plots.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "axislab/data_io.hpp"
#include "axislab/eval_metrics.hpp"

namespace axislab {

struct RocCurve {
  std::string label;
  Vector positives;
  Vector negatives;
};

struct RocPlot {
  std::string name;
  std::vector<RocCurve> curves;
  std::vector<double> operating_fprs{0.01, 0.05};
};

struct ScatterPlot {
  std::string name;
  std::string x_label = "predicted";
  std::string y_label = "measured";
  std::vector<double> x;
  std::vector<double> y;
};

struct Report {
  std::string kind;
  json config = json::object();
  json results = json::object();
  std::vector<std::pair<std::string, MetricBlock>> blocks;
  std::vector<RocPlot> rocs;
  std::vector<ScatterPlot> scatters;

  void add_block(std::string name, MetricBlock b) { blocks.emplace_back(std::move(name), std::move(b)); }

  std::string config_hash() const { return fnv1a64_hex(canonical_json(json{{"kind", kind}, {"config", config}})); }
};

/// Conventions every report carries so a reader can interpret the numbers.
inline json conventions_ledger() {
  return json{
      {"decision_rule", "score >= tau is classified positive"},
      {"auroc", "Mann-Whitney, ties counted one half"},
      {"matched_tpr_threshold", "largest tau with TPR >= target"},
      {"ablation", "cls' = cls - eps * <cls, d> d, d unit-norm"},
      {"predictor", "delta_logit = -eps * <cls, d> * <grad, d>"},
      {"strict_pareto", "bias FPR strictly lower, recall pool TPR within tolerance, AUROC not lower"},
      {"selection", "largest FPR reduction; ties by smaller |eps|, then axis order, then eps order"},
      {"multi_seed", "mean and population standard deviation"},
      {"floats", "17 significant digits, non-finite as null"},
  };
}

inline json report_json(const Report& r) {
  json blocks = json::object();
  for (const auto& [name, b] : r.blocks) blocks[name] = to_json(b);
  json plots = json::array();
  for (const auto& p : r.rocs) plots.push_back("roc_" + p.name + ".svg");
  for (const auto& p : r.scatters) plots.push_back("scatter_" + p.name + ".svg");
  return json{{"kind", r.kind},         {"config", r.config}, {"config_hash", r.config_hash()}, {"ledger", conventions_ledger()},
              {"results", r.results},   {"metric_blocks", blocks}, {"plots", plots}};
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

constexpr double kPlot = 400.0;
constexpr double kMargin = 50.0;

inline std::string svg_open(const std::string& title) {
  const double full = kPlot + 2 * kMargin;
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(full) + "\" height=\"" + num(full) + "\" viewBox=\"0 0 " +
         num(full) + " " + num(full) + "\">\n<title>" + svg_escape(title) + "</title>\n<rect x=\"" + num(kMargin) + "\" y=\"" +
         num(kMargin) + "\" width=\"" + num(kPlot) + "\" height=\"" + num(kPlot) + "\" fill=\"none\" stroke=\"black\"/>\n";
}

// Unit square to canvas, y up.
inline double sx(double x) { return kMargin + x * kPlot; }
inline double sy(double y) { return kMargin + (1.0 - y) * kPlot; }

inline std::string axis_labels(const std::string& x, const std::string& y) {
  return "<text x=\"" + num(kMargin + kPlot / 2) + "\" y=\"" + num(2 * kMargin + kPlot - 15) + "\" text-anchor=\"middle\">" +
         svg_escape(x) + "</text>\n<text x=\"15\" y=\"" + num(kMargin + kPlot / 2) + "\" transform=\"rotate(-90 15 " +
         num(kMargin + kPlot / 2) + ")\" text-anchor=\"middle\">" + svg_escape(y) + "</text>\n";
}

}  // namespace detail

/// ROC curve points (fpr, tpr) over all distinct thresholds, from (0,0) to (1,1).
inline std::vector<std::pair<double, double>> roc_points(const Vector& pos, const Vector& neg) {
  std::vector<double> t(pos.data(), pos.data() + pos.size());
  t.insert(t.end(), neg.data(), neg.data() + neg.size());
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  std::vector<std::pair<double, double>> out{{0.0, 0.0}};
  for (double tau : t) out.emplace_back(rate_at(neg, tau), rate_at(pos, tau));
  if (out.back() != std::pair{1.0, 1.0}) out.emplace_back(1.0, 1.0);
  return out;
}

inline std::string render_roc_svg(const RocPlot& p) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::string s = detail::svg_open("ROC " + p.name);
  s += "<line x1=\"" + detail::num(detail::sx(0)) + "\" y1=\"" + detail::num(detail::sy(0)) + "\" x2=\"" + detail::num(detail::sx(1)) +
       "\" y2=\"" + detail::num(detail::sy(1)) + "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (std::size_t c = 0; c < p.curves.size(); ++c) {
    const auto& curve = p.curves[c];
    const char* color = colors[c % 5];
    std::string pts;
    for (const auto& [f, t] : roc_points(curve.positives, curve.negatives))
      pts += detail::num(detail::sx(f)) + "," + detail::num(detail::sy(t)) + " ";
    s += "<polyline class=\"roc\" fill=\"none\" stroke=\"" + std::string(color) + "\" points=\"" + pts + "\"><title>" +
         detail::svg_escape(curve.label) + "</title></polyline>\n";
    for (double target : p.operating_fprs) {
      const double tpr = tpr_at_fpr(curve.positives, curve.negatives, target);
      s += "<circle class=\"operating-point\" cx=\"" + detail::num(detail::sx(target)) + "\" cy=\"" + detail::num(detail::sy(tpr)) +
           "\" r=\"4\" fill=\"" + color + "\"><title>" + detail::svg_escape(curve.label) + " FPR=" + detail::num(target) +
           " TPR=" + detail::num(tpr) + "</title></circle>\n";
    }
  }
  s += detail::axis_labels("false positive rate", "true positive rate");
  return s + "</svg>\n";
}

inline std::string render_scatter_svg(const ScatterPlot& p) {
  detail::require(p.x.size() == p.y.size(), "scatter plot: x and y differ in length");
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    for (double v : {p.x[i], p.y[i]}) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (!any || hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto u = [&](double v) { return (v - lo) / (hi - lo); };
  std::string s = detail::svg_open("scatter " + p.name);
  s += "<line class=\"identity\" x1=\"" + detail::num(detail::sx(0)) + "\" y1=\"" + detail::num(detail::sy(0)) + "\" x2=\"" +
       detail::num(detail::sx(1)) + "\" y2=\"" + detail::num(detail::sy(1)) + "\" stroke=\"#999\"/>\n";
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    if (!std::isfinite(p.x[i]) || !std::isfinite(p.y[i])) continue;
    s += "<circle class=\"point\" cx=\"" + detail::num(detail::sx(u(p.x[i]))) + "\" cy=\"" + detail::num(detail::sy(u(p.y[i]))) +
         "\" r=\"2\" fill=\"#1f77b4\"/>\n";
  }
  s += detail::axis_labels(p.x_label, p.y_label);
  return s + "</svg>\n";
}

inline std::string metric_blocks_csv(const Report& r) {
  std::string out = "block,auroc,fpr_at_tau,tpr_at_tau,tau\n";
  for (const auto& [name, b] : r.blocks)
    out += detail::csv_field(name) + "," + detail::format_double(b.auroc) + "," + detail::format_double(b.fpr_at_tau) + "," +
           detail::format_double(b.tpr_at_tau) + "," + detail::format_double(b.tau) + "\n";
  return out;
}

/// Writes report.json, metric_blocks.csv and one SVG per plot into `dir`.
/// Returns the written paths in a fixed order.
inline std::vector<fs::path> emit_report(const Report& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  detail::require(!ec && fs::is_directory(dir), "cannot create output directory '" + dir.string() + "'");
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& bytes) {
    write_file(dir / name, bytes);
    written.push_back(dir / name);
  };
  put("report.json", canonical_json(report_json(r)));
  put("metric_blocks.csv", metric_blocks_csv(r));
  for (const auto& p : r.rocs) put("roc_" + p.name + ".svg", render_roc_svg(p));
  for (const auto& p : r.scatters) put("scatter_" + p.name + ".svg", render_scatter_svg(p));
  return written;
}

}  // namespace axislab
