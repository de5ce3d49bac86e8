#pragma once

// Cell-level orchestration: eps-grid sweeps over an axis bank, strict-Pareto
// verdicts, predictor-as-selector versus the post-hoc oracle, and the
// deployment scalar rule.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "axislab/cell.hpp"
#include "axislab/parallel.hpp"
#include "axislab/predictor.hpp"

namespace axislab {

enum class Verdict { pass, decline };

inline const char* to_string(Verdict v) { return v == Verdict::pass ? "PASS" : "DECLINE"; }

struct VerdictResult {
  Verdict verdict = Verdict::decline;
  std::vector<std::string> reasons;
  // Largest clause violation; 0 for PASS and for a candidate that ties the
  // baseline FPR exactly.
  double violation = 0.0;
  // Smallest clause margin of a PASS; 0 for DECLINE.
  double slack = 0.0;
};

struct StrictParetoRule {
  std::string recall_pool = "Cp1";
  double recall_tolerance = 0.02;
};

inline constexpr double kPredictorMae = 0.002;

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

/// PASS iff bias FPR strictly drops, recall-pool TPR stays within the
/// tolerance of baseline and headline AUROC does not decrease. Every failed
/// clause is listed.
inline VerdictResult strict_pareto_verdict(const MetricBlock& baseline, const MetricBlock& candidate,
                                           const StrictParetoRule& rule = {}) {
  detail::require(baseline.pools.contains(rule.recall_pool), "strict_pareto_verdict: baseline lacks recall pool '" + rule.recall_pool + "'");
  detail::require(candidate.pools.contains(rule.recall_pool), "strict_pareto_verdict: candidate lacks recall pool '" + rule.recall_pool + "'");
  VerdictResult out;
  if (!(candidate.fpr_at_tau < baseline.fpr_at_tau)) {
    out.reasons.push_back("fpr-clause: bias FPR " + detail::fmt(candidate.fpr_at_tau) + " not strictly below baseline " +
                          detail::fmt(baseline.fpr_at_tau));
    out.violation = std::max(out.violation, candidate.fpr_at_tau - baseline.fpr_at_tau);
  }
  const double base_recall = baseline.pool_rate(rule.recall_pool);
  const double cand_recall = candidate.pool_rate(rule.recall_pool);
  const double floor = base_recall - rule.recall_tolerance;
  if (!(cand_recall >= floor)) {
    out.reasons.push_back("recall-clause: " + rule.recall_pool + " TPR " + detail::fmt(cand_recall) + " below baseline " +
                          detail::fmt(base_recall) + " - " + detail::fmt(rule.recall_tolerance));
    out.violation = std::max(out.violation, floor - cand_recall);
  }
  if (!(candidate.auroc >= baseline.auroc)) {
    out.reasons.push_back("auroc-clause: AUROC " + detail::fmt(candidate.auroc) + " below baseline " + detail::fmt(baseline.auroc));
    out.violation = std::max(out.violation, baseline.auroc - candidate.auroc);
  }
  out.verdict = out.reasons.empty() ? Verdict::pass : Verdict::decline;
  if (out.verdict == Verdict::pass)
    out.slack = std::min({baseline.fpr_at_tau - candidate.fpr_at_tau, cand_recall - floor, candidate.auroc - baseline.auroc});
  return out;
}

struct Candidate {
  std::string axis_id;
  std::size_t axis_index = 0;
  double epsilon = 0.0;
  std::optional<MetricBlock> measured;
  MetricBlock predicted;
  double predicted_delta_fpr = 0.0;
  std::optional<VerdictResult> measured_verdict;
  VerdictResult predicted_verdict;
};

/// One (cell, axis bank, eps grid) evaluation. verdict is PASS when at least
/// one candidate passes under measurement (or under prediction when the
/// cell cannot be measured).
struct ParetoCell {
  std::string cell_id;
  std::vector<std::string> axis_bank;
  std::vector<double> eps_grid;
  MetricBlock baseline;
  std::vector<Candidate> candidates;
  Verdict verdict = Verdict::decline;
  std::vector<std::string> reasons;
  StrictParetoRule rule;
  bool measured = true;
};

/// Ablates every pool along each axis at each eps and re-scores. Candidates
/// are ordered axis-major, eps ascending.
inline ParetoCell sweep(const Cell& cell, const std::vector<Direction>& axis_bank, std::vector<double> eps_grid,
                        const StrictParetoRule& rule = {}) {
  cell.validate();
  detail::require(!axis_bank.empty(), "sweep: empty axis bank");
  detail::require(!eps_grid.empty(), "sweep: empty eps grid");
  for (double e : eps_grid) detail::require(std::isfinite(e), "sweep: eps values must be finite");
  for (const auto& d : axis_bank) detail::require_same_h(d.h(), cell.h(), "sweep");
  std::sort(eps_grid.begin(), eps_grid.end());
  eps_grid.erase(std::unique(eps_grid.begin(), eps_grid.end()), eps_grid.end());

  ParetoCell out;
  out.cell_id = cell.cell_id;
  out.eps_grid = eps_grid;
  out.rule = rule;
  out.measured = cell.evaluable();
  for (const auto& d : axis_bank) out.axis_bank.push_back(d.axis_id);

  const PoolScores base = baseline_scores(cell);
  out.baseline = evaluate_block(cell, base);
  detail::require(out.baseline.pools.contains(rule.recall_pool), "sweep: cell '" + cell.cell_id + "' lacks recall pool '" + rule.recall_pool + "'");

  const std::size_t total = axis_bank.size() * eps_grid.size();
  out.candidates.resize(total);
  parallel_for(total, [&](std::size_t idx) {
    const std::size_t a = idx / eps_grid.size();
    const double eps = eps_grid[idx % eps_grid.size()];
    const Direction& d = axis_bank[a];
    Candidate c;
    c.axis_id = d.axis_id;
    c.axis_index = a;
    c.epsilon = eps;
    try {
      c.predicted = evaluate_block(cell, predicted_scores(cell, d, eps, base));
      c.predicted_delta_fpr = c.predicted.fpr_at_tau - out.baseline.fpr_at_tau;
      c.predicted_verdict = strict_pareto_verdict(out.baseline, c.predicted, rule);
      if (out.measured) {
        c.measured = evaluate_block(cell, ablated_scores(cell, d, eps));
        c.measured_verdict = strict_pareto_verdict(out.baseline, *c.measured, rule);
      }
    } catch (const ValidationError& e) {
      throw ValidationError("sweep (axis " + d.axis_id + ", eps " + detail::fmt(eps) + "): " + e.what());
    } catch (const ComputationError& e) {
      throw ComputationError("sweep (axis " + d.axis_id + ", eps " + detail::fmt(eps) + "): " + e.what());
    }
    out.candidates[idx] = std::move(c);
  });

  std::size_t fpr_fail = 0, recall_fail = 0, auroc_fail = 0;
  for (const auto& c : out.candidates) {
    const auto& v = out.measured ? *c.measured_verdict : c.predicted_verdict;
    if (v.verdict == Verdict::pass) out.verdict = Verdict::pass;
    for (const auto& r : v.reasons) {
      if (r.rfind("fpr-clause", 0) == 0) ++fpr_fail;
      if (r.rfind("recall-clause", 0) == 0) ++recall_fail;
      if (r.rfind("auroc-clause", 0) == 0) ++auroc_fail;
    }
  }
  if (out.verdict == Verdict::decline) {
    out.reasons.push_back("no candidate passes: fpr-clause failed " + std::to_string(fpr_fail) + ", recall-clause failed " +
                          std::to_string(recall_fail) + ", auroc-clause failed " + std::to_string(auroc_fail) + " of " +
                          std::to_string(out.candidates.size()));
  }
  return out;
}

enum class SelectMode { oracle, predictor };
enum class Agreement { byte_exact, mutual_decline, near_tie, disagree };

inline const char* to_string(SelectMode m) { return m == SelectMode::oracle ? "oracle" : "predictor"; }

inline const char* to_string(Agreement a) {
  switch (a) {
    case Agreement::byte_exact: return "byte-exact";
    case Agreement::mutual_decline: return "mutual-decline";
    case Agreement::near_tie: return "near-tie";
    case Agreement::disagree: return "disagree";
  }
  return "?";
}

struct Choice {
  std::size_t candidate_index = 0;
  std::string axis_id;
  double epsilon = 0.0;
  double fpr_reduction = 0.0;
};

struct SelectorDecision {
  SelectMode mode = SelectMode::oracle;
  std::optional<Choice> chosen;
};

namespace detail {

inline const MetricBlock& block_for(const Candidate& c, SelectMode mode) {
  if (mode == SelectMode::oracle) {
    require(c.measured.has_value(), "select(oracle): candidate has no measured metrics");
    return *c.measured;
  }
  return c.predicted;
}

inline const VerdictResult& verdict_for(const Candidate& c, SelectMode mode) {
  if (mode == SelectMode::oracle) {
    require(c.measured_verdict.has_value(), "select(oracle): candidate has no measured verdict");
    return *c.measured_verdict;
  }
  return c.predicted_verdict;
}

}  // namespace detail

/// Picks the PASS candidate with the largest bias-FPR reduction; ties go to
/// the smaller |eps|, then to axis-bank order, then to eps order. Oracle
/// mode reads measured metrics, predictor mode reads predicted ones.
inline SelectorDecision select(const ParetoCell& cell, SelectMode mode) {
  SelectorDecision out;
  out.mode = mode;
  for (std::size_t i = 0; i < cell.candidates.size(); ++i) {
    const auto& c = cell.candidates[i];
    if (detail::verdict_for(c, mode).verdict != Verdict::pass) continue;
    const double reduction = cell.baseline.fpr_at_tau - detail::block_for(c, mode).fpr_at_tau;
    bool better = !out.chosen;
    if (out.chosen) {
      if (reduction > out.chosen->fpr_reduction)
        better = true;
      else if (reduction == out.chosen->fpr_reduction && std::abs(c.epsilon) < std::abs(out.chosen->epsilon))
        better = true;
    }
    if (better) out.chosen = Choice{i, c.axis_id, c.epsilon, reduction};
  }
  return out;
}

struct SelectorComparison {
  SelectorDecision oracle;
  SelectorDecision predictor;
  Agreement agreement = Agreement::disagree;
  // How far the predictor's metrics sit from reproducing the oracle's call.
  double gap = 0.0;
};

/// Compares predictor-mode and oracle-mode selections. A disagreement is a
/// near-tie when the predictor's deciding margin is within the documented
/// predictor MAE.
inline SelectorComparison compare_selectors(const ParetoCell& cell, double mae = kPredictorMae) {
  SelectorComparison out;
  out.oracle = select(cell, SelectMode::oracle);
  out.predictor = select(cell, SelectMode::predictor);
  const auto& o = out.oracle.chosen;
  const auto& p = out.predictor.chosen;
  if (!o && !p) {
    out.agreement = Agreement::mutual_decline;
    return out;
  }
  if (o && p && o->candidate_index == p->candidate_index) {
    out.agreement = Agreement::byte_exact;
    return out;
  }
  if (o && !p) {
    // Predictor declined the oracle's pick: how far it missed the rule.
    out.gap = cell.candidates[o->candidate_index].predicted_verdict.violation;
  } else if (!o && p) {
    // Predictor picked something measurement rejects.
    const auto& pc = cell.candidates[p->candidate_index];
    out.gap = std::min(pc.predicted_verdict.slack, pc.measured_verdict->violation);
  } else {
    // Either the predictor's pick was within reach of failing, or the
    // oracle's pick was within reach of winning.
    const auto& oc = cell.candidates[o->candidate_index];
    const auto& pc = cell.candidates[p->candidate_index];
    const double predicted_oracle_reduction = cell.baseline.fpr_at_tau - oc.predicted.fpr_at_tau;
    out.gap = std::min(pc.predicted_verdict.slack,
                       std::max(oc.predicted_verdict.violation, p->fpr_reduction - predicted_oracle_reduction));
  }
  out.agreement = out.gap <= mae ? Agreement::near_tie : Agreement::disagree;
  return out;
}

/// Relative bias-FPR reduction of a choice, (base - cand) / base.
inline double relative_reduction(const ParetoCell& cell, const Choice& c) {
  return cell.baseline.fpr_at_tau > 0.0 ? c.fpr_reduction / cell.baseline.fpr_at_tau : 0.0;
}

/// Both aggregations of relative FPR reduction: over the selected candidate
/// only, and the mean over axes of each axis's best PASS candidate.
struct ReductionSummary {
  std::optional<double> selected;
  std::optional<double> mean_best_per_axis;
};

inline ReductionSummary reduction_summary(const ParetoCell& cell, SelectMode mode = SelectMode::oracle) {
  ReductionSummary out;
  const auto sel = select(cell, mode);
  if (sel.chosen) out.selected = relative_reduction(cell, *sel.chosen);
  if (cell.baseline.fpr_at_tau <= 0.0) return out;
  std::vector<double> best(cell.axis_bank.size(), -1.0);
  for (const auto& c : cell.candidates) {
    if (detail::verdict_for(c, mode).verdict != Verdict::pass) continue;
    const double r = (cell.baseline.fpr_at_tau - detail::block_for(c, mode).fpr_at_tau) / cell.baseline.fpr_at_tau;
    best[c.axis_index] = std::max(best[c.axis_index], r);
  }
  CompensatedSum s;
  std::size_t k = 0;
  for (double b : best)
    if (b >= 0.0) {
      s.add(b);
      ++k;
    }
  if (k > 0) out.mean_best_per_axis = s.value() / static_cast<double>(k);
  return out;
}

enum class DeploymentOutcome { success_predicted, failure_predicted };

inline const char* to_string(DeploymentOutcome o) {
  return o == DeploymentOutcome::success_predicted ? "SUCCESS_PREDICTED" : "FAILURE_PREDICTED";
}

struct DeploymentCall {
  std::string label;
  double raw_norm = 0.0;
  double threshold = 5.0;
  double margin = 0.0;  // raw_norm - threshold
  DeploymentOutcome outcome = DeploymentOutcome::failure_predicted;
};

inline constexpr double kDeploymentThreshold = 5.0;

inline DeploymentCall deployment_scalar_rule(double raw_norm, double threshold = kDeploymentThreshold, std::string label = "") {
  detail::require(std::isfinite(raw_norm) && raw_norm >= 0.0, "deployment rule: raw_norm must be a finite nonnegative value");
  detail::require(std::isfinite(threshold), "deployment rule: threshold must be finite");
  DeploymentCall c;
  c.label = std::move(label);
  c.raw_norm = raw_norm;
  c.threshold = threshold;
  c.margin = raw_norm - threshold;
  c.outcome = raw_norm >= threshold ? DeploymentOutcome::success_predicted : DeploymentOutcome::failure_predicted;
  return c;
}

/// SUCCESS iff the typicality-direction norm reaches the threshold.
inline DeploymentCall deployment_scalar_rule(const Direction& d_typ_nyt, double threshold = kDeploymentThreshold) {
  return deployment_scalar_rule(d_typ_nyt.raw_norm, threshold, d_typ_nyt.axis_id);
}

struct DeploymentPanel {
  std::vector<DeploymentCall> calls;
  std::size_t n_success = 0;
  std::size_t n_failure = 0;
  // Smallest SUCCESS norm minus largest FAILURE norm; absent when one side
  // is empty.
  std::optional<double> separation_gap;
};

inline DeploymentPanel deployment_panel(const std::vector<std::pair<std::string, double>>& norms,
                                        double threshold = kDeploymentThreshold) {
  DeploymentPanel out;
  double min_success = std::numeric_limits<double>::infinity();
  double max_failure = -std::numeric_limits<double>::infinity();
  for (const auto& [label, norm] : norms) {
    auto c = deployment_scalar_rule(norm, threshold, label);
    if (c.outcome == DeploymentOutcome::success_predicted) {
      ++out.n_success;
      min_success = std::min(min_success, norm);
    } else {
      ++out.n_failure;
      max_failure = std::max(max_failure, norm);
    }
    out.calls.push_back(std::move(c));
  }
  if (out.n_success > 0 && out.n_failure > 0) out.separation_gap = min_success - max_failure;
  return out;
}

}  // namespace axislab
