#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "axislab/core_geometry.hpp"
#include "axislab/eval_metrics.hpp"
#include "axislab/rng.hpp"

namespace axislab {

/// L2-regularized logistic probe. logit(x) = <weights, x> + bias.
struct ProbeModel {
  Vector weights;
  double bias = 0.0;
  std::size_t n_train = 0;
  double regularization = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;

  double logit(const Vector& x) const { return weights.dot(x) + bias; }

  Vector logits(const RowMatrix& x) const {
    Vector z = x * weights;
    z.array() += bias;
    return z;
  }

  double accuracy(const RowMatrix& x, const std::vector<int>& labels) const {
    detail::require(static_cast<std::size_t>(x.rows()) == labels.size(), "probe accuracy: label count mismatch");
    const Vector z = logits(x);
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if ((z(i) >= 0.0 ? 1 : 0) == labels[static_cast<std::size_t>(i)]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(labels.size());
  }

  Direction direction(std::string axis_id = "probe") const {
    return Direction::from_vector(weights, std::move(axis_id), "logistic probe n=" + std::to_string(n_train));
  }
};

inline constexpr double kDefaultProbeReg = 1e-2;
inline constexpr double kNewtonTolerance = 1e-8;
inline constexpr int kNewtonMaxIterations = 200;

namespace detail {

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void require_binary(const std::vector<int>& labels) {
  for (int l : labels) require(l == 0 || l == 1, "labels must be 0 (human) or 1 (AI)");
}

}  // namespace detail

/// Damped Newton on  sum_i logloss(y_i, <w,x_i> + b) + reg/2 ||w||^2  (bias
/// unpenalized), with Armijo backtracking so the objective never increases.
/// Stops at gradient norm <= 1e-8 or after 200 iterations.
inline ProbeModel fit_logistic(const RowMatrix& x, const std::vector<int>& labels, double reg = kDefaultProbeReg) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = x.cols();
  detail::require(n >= 2 && static_cast<std::size_t>(n) == labels.size(), "fit_logistic: need one label per row and n >= 2");
  detail::require(reg >= 0.0 && std::isfinite(reg), "fit_logistic: regularization must be a finite nonnegative value");
  detail::require(x.allFinite(), "fit_logistic: non-finite features");
  detail::require_binary(labels);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  detail::require(has_pos && has_neg, "fit_logistic: both classes must be present");

  Matrix design(n, h + 1);
  design.leftCols(h) = x;
  design.col(h).setOnes();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];

  auto objective = [&](const Vector& theta) {
    const Vector z = design * theta;
    CompensatedSum s;
    for (Eigen::Index i = 0; i < n; ++i) s.add(detail::softplus(z(i)) - y(i) * z(i));
    return s.value() + 0.5 * reg * theta.head(h).squaredNorm();
  };

  Vector theta = Vector::Zero(h + 1);
  ProbeModel model;
  model.n_train = static_cast<std::size_t>(n);
  model.regularization = reg;
  double f = objective(theta);
  model.objective_trace.push_back(f);
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    const Vector z = design * theta;
    Vector p(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = detail::sigmoid(z(i));
      s(i) = p(i) * (1.0 - p(i));
    }
    Vector grad = design.transpose() * (p - y);
    grad.head(h) += reg * theta.head(h);
    if (grad.norm() <= kNewtonTolerance) {
      model.converged = true;
      break;
    }
    Matrix hess = design.transpose() * s.asDiagonal() * design;
    hess.topLeftCorner(h, h).diagonal().array() += reg;
    // Keep the system solvable once the sigmoid saturates.
    hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
    const Vector step = hess.ldlt().solve(-grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    Vector next = theta + step;
    double f_next = objective(next);
    while (f_next > f + 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      next = theta + t * step;
      f_next = objective(next);
    }
    if (f_next > f) break;  // no descent possible at working precision
    theta = next;
    f = f_next;
    model.objective_trace.push_back(f);
    model.iterations = it + 1;
    if (reg == 0.0 && theta.head(h).norm() > 1e8) break;
  }
  if (!model.converged) {
    // Final gradient check (the loop may exit right after a successful step).
    const Vector z = design * theta;
    Vector g = Vector::Zero(h + 1);
    for (Eigen::Index i = 0; i < n; ++i) g += (detail::sigmoid(z(i)) - y(i)) * design.row(i).transpose();
    g.head(h) += reg * theta.head(h);
    model.converged = g.norm() <= kNewtonTolerance;
  }
  // Unregularized separable data has no finite optimum: the loss heads to
  // zero while the weights grow without bound.
  if (reg == 0.0 && (!model.converged || theta.head(h).norm() > 1e8 || f < 1e-6 * static_cast<double>(n)))
    throw ComputationError("fit_logistic: weights diverge (data are separable); use reg > 0");
  model.weights = theta.head(h);
  model.bias = theta(h);
  detail::check_computable(model.weights.allFinite() && std::isfinite(model.bias), "fit_logistic: non-finite weights");
  return model;
}

struct ProbeFit {
  ProbeModel model;
  std::vector<Eigen::Index> train_rows;
};

/// Few-shot probe: draws n_shots / |strata| rows from each stratum (rows
/// tagged by row_tags), deterministically by seed, and fits on them.
inline ProbeFit fit_logistic_probe(const EmbeddingMatrix& emb, const std::vector<int>& labels,
                                   const std::vector<std::string>& row_tags, const std::vector<std::string>& strata,
                                   std::size_t n_shots, double reg, std::uint64_t seed) {
  emb.validate();
  detail::require(labels.size() == static_cast<std::size_t>(emb.n()) && row_tags.size() == labels.size(),
                  "fit_logistic_probe: labels and tags must align with embedding rows");
  detail::require(!strata.empty(), "fit_logistic_probe: no strata given");
  detail::require(n_shots > 0 && n_shots % strata.size() == 0,
                  "fit_logistic_probe: n_shots (" + std::to_string(n_shots) + ") must be divisible by the number of strata (" +
                      std::to_string(strata.size()) + ")");
  const std::size_t per = n_shots / strata.size();
  ProbeFit out;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < row_tags.size(); ++i)
      if (row_tags[i] == strata[s]) members.push_back(static_cast<Eigen::Index>(i));
    detail::require(members.size() >= per, "fit_logistic_probe: stratum '" + strata[s] + "' has " + std::to_string(members.size()) +
                                               " texts, needs " + std::to_string(per));
    CounterRng rng(seed, stream::id(stream::probe_shots, s));
    rng.shuffle(members);
    out.train_rows.insert(out.train_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(per));
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  RowMatrix x(static_cast<Eigen::Index>(out.train_rows.size()), emb.h());
  std::vector<int> y;
  for (std::size_t k = 0; k < out.train_rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = emb.data.row(out.train_rows[k]);
    y.push_back(labels[static_cast<std::size_t>(out.train_rows[k])]);
  }
  out.model = fit_logistic(x, y, reg);
  return out;
}

struct InlpResult {
  Matrix projector;                 // h x h, rank h - k
  Matrix removed;                   // h x k orthonormal basis of removed directions
  std::vector<double> accuracies;   // held-out accuracy of probe i, before its removal
  double residual_accuracy = 0.0;   // probe refit after the final projection, held-out
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> heldout_rows;
};

namespace detail {

inline RowMatrix take_rows(const RowMatrix& x, const std::vector<Eigen::Index>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

inline std::vector<int> take(const std::vector<int>& v, const std::vector<Eigen::Index>& rows) {
  std::vector<int> out;
  for (auto r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace detail

/// Iterative nullspace projection: fit a linear concept probe, project the
/// data onto the nullspace of its weight vector, repeat k times. Rows are
/// split 70/30 (by seed) into fitting and held-out sets.
inline InlpResult inlp(const EmbeddingMatrix& emb, const std::vector<int>& labels, std::size_t k,
                       double reg = kDefaultProbeReg, std::uint64_t seed = 0) {
  emb.validate();
  detail::require(labels.size() == static_cast<std::size_t>(emb.n()), "inlp: one label per row required");
  detail::require(k >= 1, "inlp: k must be at least 1");
  detail::require(static_cast<Eigen::Index>(k) < emb.h(), "inlp: k (" + std::to_string(k) + ") must be below h (" + std::to_string(emb.h()) + ")");
  detail::require_binary(labels);
  const Eigen::Index h = emb.h();

  InlpResult out;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(emb.n()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  CounterRng rng(seed, stream::id(stream::inlp_split));
  rng.shuffle(order);
  const std::size_t n_train = std::max<std::size_t>(2, (order.size() * 7) / 10);
  detail::require(n_train < order.size(), "inlp: too few rows for a held-out split");
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.heldout_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.heldout_rows.begin(), out.heldout_rows.end());
  const RowMatrix xtr = detail::take_rows(emb.data, out.train_rows);
  const RowMatrix xte = detail::take_rows(emb.data, out.heldout_rows);
  const auto ytr = detail::take(labels, out.train_rows);
  const auto yte = detail::take(labels, out.heldout_rows);

  Matrix stacked(h, 0);
  Matrix projector = Matrix::Identity(h, h);
  for (std::size_t it = 0; it < k; ++it) {
    const RowMatrix ptr = xtr * projector;
    const RowMatrix pte = xte * projector;
    const ProbeModel probe = fit_logistic(ptr, ytr, reg);
    out.accuracies.push_back(probe.accuracy(pte, yte));
    const Vector w = projector * probe.weights;
    detail::check_computable(w.norm() > 1e-12, "inlp: probe weights vanish inside the remaining subspace");
    stacked.conservativeResize(h, stacked.cols() + 1);
    stacked.col(stacked.cols() - 1) = w / w.norm();
    // Householder orthogonalization of all removed directions so far.
    Eigen::HouseholderQR<Matrix> qr(stacked);
    const Matrix q = qr.householderQ() * Matrix::Identity(h, stacked.cols());
    projector = Matrix::Identity(h, h) - q * q.transpose();
    out.removed = q;
  }
  out.projector = projector;
  const ProbeModel residual = fit_logistic(xtr * projector, ytr, reg);
  out.residual_accuracy = residual.accuracy(xte * projector, yte);
  return out;
}

struct PathEstimate {
  double coef = 0.0;
  double p_value = 1.0;
};

enum class MediationOutcome { mediation, no_mediation };

inline const char* to_string(MediationOutcome m) { return m == MediationOutcome::mediation ? "mediation" : "no-mediation"; }

struct MediationVerdict {
  PathEstimate path_xy;          // y ~ x (total effect c)
  PathEstimate path_xm;          // m ~ x (a)
  PathEstimate path_my_given_x;  // y ~ x + m, coefficient of m (b)
  PathEstimate direct_x;         // y ~ x + m, coefficient of x (c')
  double x_attenuation = 0.0;    // (c - c') / c
  MediationOutcome verdict = MediationOutcome::no_mediation;
};

/// Three-stage Baron-Kenny test with two-sided t-tests on n - p degrees of
/// freedom. Mediation iff the three paths are significant at alpha and the
/// x coefficient shrinks in magnitude once m is controlled.
inline MediationVerdict baron_kenny(const Vector& x, const Vector& m, const Vector& y, double alpha = 0.05) {
  detail::require(x.size() == m.size() && x.size() == y.size(), "baron_kenny: vectors must have equal length");
  detail::require(x.size() >= 10, "baron_kenny: need at least 10 observations");
  detail::require(alpha > 0.0 && alpha < 1.0, "baron_kenny: alpha must lie in (0,1)");
  detail::check_computable(stats::variance(x) > 0.0, "baron_kenny: x has zero variance");
  detail::check_computable(stats::variance(m) > 0.0, "baron_kenny: m has zero variance");
  detail::check_computable(stats::variance(y) > 0.0, "baron_kenny: y has zero variance");

  const OlsFit total = ols_fit(y, Matrix(x), {"x"});
  const OlsFit a_path = ols_fit(m, Matrix(x), {"x"});
  Matrix xm(x.size(), 2);
  xm.col(0) = x;
  xm.col(1) = m;
  const OlsFit full = ols_fit(y, xm, {"x", "m"});

  MediationVerdict v;
  v.path_xy = {total.coef(1), total.p_value(1)};
  v.path_xm = {a_path.coef(1), a_path.p_value(1)};
  v.direct_x = {full.coef(1), full.p_value(1)};
  v.path_my_given_x = {full.coef(2), full.p_value(2)};
  detail::check_computable(v.path_xy.coef != 0.0, "baron_kenny: zero total effect");
  v.x_attenuation = (v.path_xy.coef - v.direct_x.coef) / v.path_xy.coef;
  const bool significant = v.path_xy.p_value < alpha && v.path_xm.p_value < alpha && v.path_my_given_x.p_value < alpha;
  const bool attenuates = std::abs(v.direct_x.coef) < std::abs(v.path_xy.coef);
  v.verdict = significant && attenuates ? MediationOutcome::mediation : MediationOutcome::no_mediation;
  return v;
}

}  // namespace axislab
