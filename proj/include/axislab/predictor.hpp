#pragma once

// Closed-form first-order predictor of the logit shift caused by a rank-1
// representation update, plus the measurements it is checked against.
//
// Update rule: cls' = cls - eps * <cls, d> * d. At eps = 1 this removes the
// component along d. For a head with gradient g at cls the first-order
// shift is  dlogit = -eps * <cls, d> * <g, d>,  exact for linear heads.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "axislab/cell.hpp"
#include "axislab/parallel.hpp"
#include "axislab/rng.hpp"

namespace axislab {

inline Vector apply_ablation(const Vector& cls, const Direction& d, double epsilon) {
  detail::require_same_h(cls.size(), d.h(), "apply_ablation");
  return cls - (epsilon * cls.dot(d.unit)) * d.unit;
}

inline RowMatrix ablate_rows(const RowMatrix& rows, const Direction& d, double epsilon) {
  detail::require_same_h(rows.cols(), d.h(), "ablate_rows");
  const Vector coef = rows * d.unit;
  RowMatrix out = rows;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) -= (epsilon * coef(i)) * d.unit.transpose();
  return out;
}

inline double predict_delta_logit(const Vector& cls, const Direction& d, const HeadModel& head, double epsilon,
                                  Eigen::Index row = -1) {
  detail::require_same_h(cls.size(), d.h(), "predict_delta_logit");
  const Vector grad = head.gradient(cls, row);
  detail::require_same_h(grad.size(), d.h(), "predict_delta_logit");
  // + 0.0 folds a signed zero at eps = 0 into +0.
  return -epsilon * cls.dot(d.unit) * grad.dot(d.unit) + 0.0;
}

/// logit(ablated cls) - logit(cls). Requires a head that can be evaluated
/// away from the baseline (linear or the toy MLP).
inline double measure_delta_logit(const Vector& cls, const Direction& d, const HeadModel& head, double epsilon) {
  detail::require(head.evaluable(), std::string("measure_delta_logit: ") + to_string(head.kind()) +
                                        " heads carry precomputed measurements only");
  return head.logit(apply_ablation(cls, d, epsilon)) - head.logit(cls);
}

/// 1 - SS_resid / SS_total of the identity fit measured ~ predicted
/// (no slope or intercept refit).
inline double fit_r2(const Vector& predicted, const Vector& measured) {
  detail::require(predicted.size() == measured.size(), "fit_r2: vectors not aligned");
  detail::require(measured.size() >= 2, "fit_r2: need at least two measurements");
  const double m = stats::mean(measured);
  CompensatedSum ss_res, ss_tot;
  for (Eigen::Index i = 0; i < measured.size(); ++i) {
    const double r = measured(i) - predicted(i);
    ss_res.add(r * r);
    ss_tot.add((measured(i) - m) * (measured(i) - m));
  }
  detail::check_computable(ss_tot.value() > 0.0, "fit_r2: measured values have zero variance");
  return 1.0 - ss_res.value() / ss_tot.value();
}

struct PredictionRecord {
  double epsilon = 0.0;
  std::string axis_id;
  Vector predicted;
  std::optional<Vector> measured;
  // Factors of the predictor per text, so sign flips can be attributed to
  // the projection or to the head-gradient alignment.
  Vector projection;
  Vector gradient_alignment;
  std::optional<double> r2;
};

inline PredictionRecord predict_pool(const EmbeddingMatrix& emb, const Direction& d, const HeadModel& head,
                                     double epsilon) {
  detail::require_same_h(emb.h(), d.h(), "predict_pool");
  PredictionRecord rec;
  rec.epsilon = epsilon;
  rec.axis_id = d.axis_id;
  rec.predicted.resize(emb.n());
  rec.projection.resize(emb.n());
  rec.gradient_alignment.resize(emb.n());
  for (Eigen::Index i = 0; i < emb.n(); ++i) {
    const Vector cls = emb.data.row(i).transpose();
    const Vector grad = head.gradient(cls, i);
    rec.projection(i) = cls.dot(d.unit);
    rec.gradient_alignment(i) = grad.dot(d.unit);
    rec.predicted(i) = -epsilon * rec.projection(i) * rec.gradient_alignment(i) + 0.0;
  }
  if (head.evaluable()) {
    Vector m(emb.n());
    for (Eigen::Index i = 0; i < emb.n(); ++i) m(i) = measure_delta_logit(emb.data.row(i).transpose(), d, head, epsilon);
    rec.measured = std::move(m);
    if (emb.n() >= 2 && stats::variance(*rec.measured) > 0.0) rec.r2 = fit_r2(rec.predicted, *rec.measured);
  }
  return rec;
}

/// Measured per-pool scores after ablating every pool along d.
inline PoolScores ablated_scores(const Cell& cell, const Direction& d, double epsilon) {
  detail::require(cell.evaluable(), "ablated_scores: cell head is not evaluable; use predicted scores");
  PoolScores out;
  for (const auto& p : cell.pools) out[p.name] = score_rows(cell.head_for(p), ablate_rows(p.emb.data, d, epsilon));
  return out;
}

/// Baseline scores shifted by the first-order predicted logit change.
inline PoolScores predicted_scores(const Cell& cell, const Direction& d, double epsilon, const PoolScores& baseline) {
  PoolScores out;
  for (const auto& p : cell.pools) {
    const auto& hm = cell.head_for(p);
    Vector s = baseline.at(p.name);
    for (Eigen::Index i = 0; i < p.emb.n(); ++i) s(i) += predict_delta_logit(p.emb.data.row(i).transpose(), d, hm, epsilon, i);
    out[p.name] = std::move(s);
  }
  return out;
}

/// K isotropic unit directions (normalized standard normals), optionally
/// Gram-Schmidt-orthogonalized against a reference axis. Draw k uses its own
/// RNG stream, so the set does not depend on evaluation order.
inline std::vector<Direction> sample_random_directions(Eigen::Index h, std::size_t k, std::uint64_t seed,
                                                       const Direction* orthogonal_to = nullptr) {
  detail::require(h >= 1, "random directions: h must be positive");
  if (orthogonal_to) {
    detail::require_same_h(h, orthogonal_to->h(), "random directions");
    detail::require(h >= 2, "random directions: orthogonal complement of the reference axis is empty (h = 1)");
  }
  std::vector<Direction> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    CounterRng rng(seed, stream::id(stream::random_direction, j));
    for (int attempt = 0;; ++attempt) {
      Vector v(h);
      for (Eigen::Index i = 0; i < h; ++i) v(i) = rng.normal();
      if (orthogonal_to) {
        v -= v.dot(orthogonal_to->unit) * orthogonal_to->unit;
        v -= v.dot(orthogonal_to->unit) * orthogonal_to->unit;
      }
      if (v.norm() > 1e-8 || attempt > 16) {
        out.push_back(Direction::from_vector(v, "random_" + std::to_string(j), "isotropic seed=" + std::to_string(seed)));
        break;
      }
    }
  }
  return out;
}

struct NullSummary {
  std::size_t k = 0;
  double epsilon = 0.0;
  std::vector<double> delta_fpr;  // signed, one per direction
  double max_abs_delta_fpr = 0.0;
  double median_abs_delta_fpr = 0.0;
  double q90_abs_delta_fpr = 0.0;
  double median_abs_delta_logit = 0.0;
  double q90_abs_delta_logit = 0.0;
  double max_abs_delta_logit = 0.0;
  bool measured = true;
};

/// Bias-pool FPR change at the cell threshold for one ablation. Uses
/// measured scores when the head is evaluable, predicted scores otherwise.
inline double ablation_delta_fpr(const Cell& cell, const Direction& d, double epsilon, const PoolScores& baseline) {
  const auto& bias = cell.pool(cell.bias_pool);
  const auto& hm = cell.head_for(bias);
  Vector after;
  if (hm.evaluable()) {
    after = score_rows(hm, ablate_rows(bias.emb.data, d, epsilon));
  } else {
    after = baseline.at(bias.name);
    for (Eigen::Index i = 0; i < bias.emb.n(); ++i) after(i) += predict_delta_logit(bias.emb.data.row(i).transpose(), d, hm, epsilon, i);
  }
  return rate_at(after, cell.tau) - rate_at(baseline.at(bias.name), cell.tau);
}

inline NullSummary random_axis_null(const Cell& cell, double epsilon, std::size_t k, std::uint64_t seed,
                                    const Direction* orthogonal_to = nullptr) {
  cell.validate();
  detail::require(k >= 1, "random_axis_null: K must be at least 1");
  const auto dirs = sample_random_directions(cell.h(), k, seed, orthogonal_to);
  const PoolScores base = baseline_scores(cell);
  const auto& bias = cell.pool(cell.bias_pool);
  const auto& hm = cell.head_for(bias);

  NullSummary out;
  out.k = k;
  out.epsilon = epsilon;
  out.measured = hm.evaluable();
  out.delta_fpr.assign(k, 0.0);
  std::vector<std::vector<double>> logit_shifts(k);
  parallel_for(k, [&](std::size_t j) {
    out.delta_fpr[j] = ablation_delta_fpr(cell, dirs[j], epsilon, base);
    auto& shifts = logit_shifts[j];
    shifts.reserve(static_cast<std::size_t>(bias.emb.n()));
    if (hm.evaluable()) {
      const Vector after = score_rows(hm, ablate_rows(bias.emb.data, dirs[j], epsilon));
      for (Eigen::Index i = 0; i < after.size(); ++i) shifts.push_back(std::abs(after(i) - base.at(bias.name)(i)));
    } else {
      for (Eigen::Index i = 0; i < bias.emb.n(); ++i)
        shifts.push_back(std::abs(predict_delta_logit(bias.emb.data.row(i).transpose(), dirs[j], hm, epsilon, i)));
    }
  });
  std::vector<double> abs_fpr;
  for (double v : out.delta_fpr) abs_fpr.push_back(std::abs(v));
  std::vector<double> all_shifts;
  for (const auto& s : logit_shifts) all_shifts.insert(all_shifts.end(), s.begin(), s.end());
  out.max_abs_delta_fpr = *std::max_element(abs_fpr.begin(), abs_fpr.end());
  out.median_abs_delta_fpr = stats::median(abs_fpr);
  out.q90_abs_delta_fpr = stats::quantile(abs_fpr, 0.9);
  out.median_abs_delta_logit = stats::median(all_shifts);
  out.q90_abs_delta_logit = stats::quantile(all_shifts, 0.9);
  out.max_abs_delta_logit = *std::max_element(all_shifts.begin(), all_shifts.end());
  return out;
}

/// One row of the Taylor-range table: predictor error at a single eps.
struct TaylorRow {
  double epsilon = 0.0;
  double median_relative_error = 0.0;
  double median_absolute_error = 0.0;
  std::size_t n = 0;
  bool within_band = false;  // |eps| <= 0.7
};

inline constexpr double kTaylorBand = 0.7;

/// Per-eps error of the first-order predictor against measurement on an
/// evaluable head. Signs of eps are reported separately, never pooled.
inline std::vector<TaylorRow> taylor_table(const EmbeddingMatrix& emb, const Direction& d, const HeadModel& head,
                                           const std::vector<double>& eps_grid) {
  detail::require(head.evaluable(), "taylor_table: head must be evaluable");
  std::vector<TaylorRow> rows;
  for (double eps : eps_grid) {
    const auto rec = predict_pool(emb, d, head, eps);
    std::vector<double> rel, abs_err;
    for (Eigen::Index i = 0; i < emb.n(); ++i) {
      const double m = (*rec.measured)(i);
      const double e = std::abs(m - rec.predicted(i));
      abs_err.push_back(e);
      if (m != 0.0) rel.push_back(e / std::abs(m));
    }
    TaylorRow row;
    row.epsilon = eps;
    row.n = static_cast<std::size_t>(emb.n());
    row.median_absolute_error = stats::median(abs_err);
    row.median_relative_error = rel.empty() ? 0.0 : stats::median(rel);
    row.within_band = std::abs(eps) <= kTaylorBand + 1e-12;
    rows.push_back(row);
  }
  return rows;
}

/// Least-squares slope of log(y) on log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "log_log_slope: need two or more aligned points");
  Vector lx(static_cast<Eigen::Index>(x.size())), ly(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::check_computable(x[i] > 0.0 && y[i] > 0.0, "log_log_slope: values must be positive");
    lx(static_cast<Eigen::Index>(i)) = std::log(x[i]);
    ly(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  detail::check_computable(sxx > 0.0, "log_log_slope: x values are all equal");
  return ((lx.array() - mx) * (ly.array() - my)).sum() / sxx;
}

}  // namespace axislab
