#pragma once

// Axis construction and direction-level linear algebra over embedding
// populations: centroid-difference axes, projections, cosines, OLS
// residualization, partial correlation, single-component PLS, effective
// rank and joint partial R^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "axislab/error.hpp"
#include "axislab/stats.hpp"

namespace axislab {

/// Per-text representation vectors for one (population, architecture, layer)
/// cell. Row t is the vector of the t-th text in manifest order.
struct EmbeddingMatrix {
  std::string cell_id;
  std::string architecture;
  int layer = 0;
  RowMatrix data;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index h() const { return data.cols(); }

  void validate() const {
    detail::require(n() >= 1, "embedding matrix '" + cell_id + "' has no rows");
    detail::require(h() >= 2, "embedding matrix '" + cell_id + "' needs h >= 2, got " + std::to_string(h()));
    for (Eigen::Index i = 0; i < n(); ++i)
      detail::require(data.row(i).allFinite(), "embedding matrix '" + cell_id + "': non-finite value in row " + std::to_string(i));
  }

  static EmbeddingMatrix from(RowMatrix data, std::string cell_id = "", std::string architecture = "", int layer = 0) {
    EmbeddingMatrix e{std::move(cell_id), std::move(architecture), layer, std::move(data)};
    e.validate();
    return e;
  }

  // Rows selected by index, keeping metadata.
  EmbeddingMatrix subset(const std::vector<Eigen::Index>& rows, std::string suffix = "") const {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), h());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      detail::require(rows[k] >= 0 && rows[k] < n(), "row index out of range");
      out.row(static_cast<Eigen::Index>(k)) = data.row(rows[k]);
    }
    return {cell_id + suffix, architecture, layer, std::move(out)};
  }
};

inline constexpr std::array<std::string_view, 9> kAxisTags = {"class", "typ_HC3", "typ_A",  "typ_NYT", "typ_FT",
                                                             "form",  "caps_PLS", "probe", "random"};

// An axis id is one of the known tags, optionally followed by a separator
// and a free suffix ("typ_A_naive", "class:electra_s42").
inline bool is_valid_axis_id(std::string_view id) {
  for (auto tag : kAxisTags) {
    if (id == tag) return true;
    if (id.size() > tag.size() && id.substr(0, tag.size()) == tag) {
      const char sep = id[tag.size()];
      if (sep == '_' || sep == ':' || sep == '-' || sep == '.' || sep == '/') return true;
    }
  }
  return false;
}

inline constexpr double kDegenerateAxisNorm = 1e-12;
inline constexpr double kWeakAxisRatio = 1e-3;

/// A labeled unit axis in representation space. raw_norm keeps the length
/// of the vector before normalization (e.g. the centroid gap).
struct Direction {
  std::string axis_id;
  Vector unit;
  double raw_norm = 0.0;
  std::string provenance;
  bool weak = false;

  Eigen::Index h() const { return unit.size(); }

  static Direction from_vector(const Vector& v, std::string axis_id, std::string provenance = "") {
    detail::require(is_valid_axis_id(axis_id), "unknown axis id '" + axis_id + "'");
    detail::require(v.size() >= 1 && v.allFinite(), "direction vector must be finite and nonempty");
    const double norm = v.norm();
    detail::check_computable(norm >= kDegenerateAxisNorm,
                             "degenerate axis '" + axis_id + "': vector norm " + std::to_string(norm) + " below 1e-12");
    return {std::move(axis_id), v / norm, norm, std::move(provenance), false};
  }

  Direction negated() const {
    Direction d = *this;
    d.unit = -unit;
    return d;
  }
};

/// Per-text named real columns aligned to manifest order. Values can be
/// absent for individual texts; operations that need a column fail listing
/// the texts that lack it.
class CovariateTable {
 public:
  CovariateTable() = default;
  explicit CovariateTable(std::vector<std::string> text_ids) : text_ids_(std::move(text_ids)) {}

  std::size_t size() const { return text_ids_.size(); }
  const std::vector<std::string>& text_ids() const { return text_ids_; }

  void set(const std::string& name, std::size_t row, double value) {
    auto& col = columns_[name];
    col.resize(text_ids_.size());
    col.at(row) = value;
  }

  void set_column(const std::string& name, const Vector& values) {
    detail::require(static_cast<std::size_t>(values.size()) == text_ids_.size(),
                    "covariate '" + name + "' length does not match table");
    auto& col = columns_[name];
    col.assign(text_ids_.size(), std::nullopt);
    for (Eigen::Index i = 0; i < values.size(); ++i) col[static_cast<std::size_t>(i)] = values(i);
  }

  bool has(const std::string& name) const { return columns_.contains(name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : columns_) out.push_back(k);
    return out;
  }

  std::optional<double> value(const std::string& name, std::size_t row) const {
    auto it = columns_.find(name);
    if (it == columns_.end() || row >= it->second.size()) return std::nullopt;
    return it->second[row];
  }

  Vector column(const std::string& name) const {
    auto it = columns_.find(name);
    detail::require(it != columns_.end(), "covariate '" + name + "' not present in table");
    std::vector<std::string> missing;
    Vector out(static_cast<Eigen::Index>(text_ids_.size()));
    for (std::size_t i = 0; i < text_ids_.size(); ++i) {
      const auto& v = i < it->second.size() ? it->second[i] : std::optional<double>{};
      if (!v || !std::isfinite(*v))
        missing.push_back(text_ids_[i]);
      else
        out(static_cast<Eigen::Index>(i)) = *v;
    }
    if (!missing.empty()) {
      std::string msg = "covariate '" + name + "' missing or non-finite for " + std::to_string(missing.size()) + " text(s):";
      for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + missing[k];
      if (missing.size() > 20) msg += " ...";
      throw ValidationError(msg);
    }
    return out;
  }

  Matrix columns(const std::vector<std::string>& names) const {
    Matrix out(static_cast<Eigen::Index>(text_ids_.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = column(names[j]);
    return out;
  }

  CovariateTable subset(const std::vector<Eigen::Index>& rows) const {
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(text_ids_.at(static_cast<std::size_t>(r)));
    CovariateTable out(std::move(ids));
    for (const auto& [name, col] : columns_) {
      auto& dst = out.columns_[name];
      for (auto r : rows) dst.push_back(static_cast<std::size_t>(r) < col.size() ? col[static_cast<std::size_t>(r)] : std::nullopt);
    }
    return out;
  }

 private:
  std::vector<std::string> text_ids_;
  std::map<std::string, std::vector<std::optional<double>>> columns_;
};

namespace detail {

inline void require_same_h(Eigen::Index a, Eigen::Index b, const char* op) {
  require(a == b, std::string(op) + ": dimension mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

inline double median_row_norm(const RowMatrix& a, const RowMatrix& b) {
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(a.rows() + b.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) norms.push_back(a.row(i).norm());
  for (Eigen::Index i = 0; i < b.rows(); ++i) norms.push_back(b.row(i).norm());
  return stats::median(std::move(norms));
}

}  // namespace detail

/// Axis from population A toward population B's complement:
/// unit = normalize(mean(A) - mean(B)), raw_norm = ||mean(A) - mean(B)||.
inline Direction compute_direction(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::string axis_id,
                                   std::string provenance = "") {
  a.validate();
  b.validate();
  detail::require_same_h(a.h(), b.h(), "compute_direction");
  const Vector gap = stats::column_means(a.data) - stats::column_means(b.data);
  if (provenance.empty()) provenance = "centroid(" + a.cell_id + ") - centroid(" + b.cell_id + ")";
  Direction d = Direction::from_vector(gap, std::move(axis_id), std::move(provenance));
  d.weak = d.raw_norm < kWeakAxisRatio * detail::median_row_norm(a.data, b.data);
  return d;
}

inline Vector project(const EmbeddingMatrix& emb, const Direction& d) {
  detail::require_same_h(emb.h(), d.h(), "project");
  return emb.data * d.unit;
}

inline double cosine(const Direction& d1, const Direction& d2) {
  detail::require_same_h(d1.h(), d2.h(), "cosine");
  return std::clamp(d1.unit.dot(d2.unit), -1.0, 1.0);
}

/// Ordinary least squares with an optional intercept. coef[0] is the
/// intercept when present; inference uses n - p residual degrees of freedom.
struct OlsFit {
  std::vector<std::string> names;
  Vector coef;
  Vector std_error;
  Vector t_stat;
  Vector p_value;
  Vector residuals;
  double ssr = 0.0;
  double sst = 0.0;
  double r2 = 0.0;
  Eigen::Index dof = 0;
};

namespace detail {

inline Eigen::Index numeric_rank(const Matrix& x) {
  if (x.cols() == 0) return 0;
  Matrix scaled = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double norm = x.col(j).norm();
    if (norm > 0.0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
  qr.setThreshold(1e-10);
  return qr.rank();
}

// Names of the columns that add nothing to the span of the columns before them.
inline std::vector<std::string> collinear_columns(const Matrix& design, const std::vector<std::string>& names) {
  std::vector<std::string> bad;
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    const Eigen::Index r = numeric_rank(design.leftCols(j + 1));
    if (r == rank)
      bad.push_back(names[static_cast<std::size_t>(j)]);
    else
      rank = r;
  }
  return bad;
}

inline std::vector<std::string> default_names(Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < k; ++j) out.push_back("x" + std::to_string(j));
  return out;
}

}  // namespace detail

inline OlsFit ols_fit(const Vector& y, const Matrix& x, std::vector<std::string> names = {}, bool intercept = true) {
  const Eigen::Index n = y.size();
  detail::require(x.rows() == n || x.cols() == 0, "ols: design has " + std::to_string(x.rows()) + " rows, target has " + std::to_string(n));
  detail::require(y.allFinite() && (x.cols() == 0 || x.allFinite()), "ols: non-finite input");
  if (names.empty()) names = detail::default_names(x.cols());
  detail::require(static_cast<Eigen::Index>(names.size()) == x.cols(), "ols: one name per column required");

  const Eigen::Index p = x.cols() + (intercept ? 1 : 0);
  Matrix design(n, p);
  std::vector<std::string> all_names;
  if (intercept) {
    design.col(0).setOnes();
    all_names.emplace_back("(intercept)");
  }
  if (x.cols() > 0) design.rightCols(x.cols()) = x;
  all_names.insert(all_names.end(), names.begin(), names.end());

  detail::require(n >= p, "ols: " + std::to_string(n) + " rows cannot identify " + std::to_string(p) + " coefficients");

  OlsFit fit;
  fit.names = all_names;
  fit.dof = n - p;
  if (p == 0) {
    fit.residuals = y;
  } else {
    if (detail::numeric_rank(design) < p) {
      std::string msg = "ols: rank-deficient design; collinear column(s):";
      for (const auto& c : detail::collinear_columns(design, all_names)) msg += " " + c;
      throw ComputationError(msg);
    }
    Vector scale(p);
    for (Eigen::Index j = 0; j < p; ++j) scale(j) = design.col(j).norm();
    const Matrix scaled = design * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    const Vector coef_scaled = qr.solve(y);
    fit.coef = coef_scaled.cwiseQuotient(scale);
    fit.residuals = y - design * fit.coef;
    // Unscaled inverse Gram diagonal through R: (X'X)^-1 = P R^-1 R^-T P'.
    const Matrix r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Matrix rinv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    const Matrix cov_perm = rinv * rinv.transpose();
    const Matrix cov_scaled = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
    fit.std_error.resize(p);
    fit.t_stat.resize(p);
    fit.p_value.resize(p);
    CompensatedSum ssr;
    for (Eigen::Index i = 0; i < n; ++i) ssr.add(fit.residuals(i) * fit.residuals(i));
    fit.ssr = ssr.value();
    const double sigma2 = fit.dof > 0 ? fit.ssr / static_cast<double>(fit.dof) : std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index j = 0; j < p; ++j) {
      fit.std_error(j) = std::sqrt(sigma2 * cov_scaled(j, j)) / scale(j);
      fit.t_stat(j) = fit.coef(j) / fit.std_error(j);
      if (fit.dof > 0 && std::isfinite(fit.t_stat(j))) {
        boost::math::students_t dist(static_cast<double>(fit.dof));
        fit.p_value(j) = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t_stat(j))));
      } else {
        fit.p_value(j) = fit.ssr == 0.0 && fit.coef(j) != 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  if (p == 0) {
    CompensatedSum ssr;
    for (Eigen::Index i = 0; i < n; ++i) ssr.add(y(i) * y(i));
    fit.ssr = ssr.value();
  }
  if (n >= 1) {
    const double m = stats::mean(y);
    CompensatedSum sst;
    for (Eigen::Index i = 0; i < n; ++i) sst.add((y(i) - m) * (y(i) - m));
    fit.sst = sst.value();
    fit.r2 = fit.sst > 0.0 ? 1.0 - fit.ssr / fit.sst : 0.0;
  }
  return fit;
}

/// Residuals of y after OLS on the covariate columns plus an intercept.
inline Vector ols_residualize(const Vector& y, const Matrix& x, std::vector<std::string> names = {}) {
  detail::require(y.size() >= 1, "ols_residualize: empty target");
  return ols_fit(y, x, std::move(names), true).residuals;
}

/// Pearson correlation of x and y after regressing out the controls
/// (with intercept) from both.
inline double partial_correlation(const Vector& x, const Vector& y, const Matrix& controls,
                                  std::vector<std::string> names = {}) {
  detail::require(x.size() == y.size(), "partial_correlation: length mismatch");
  if (controls.cols() == 0) return stats::pearson(x, y);
  const Vector rx = ols_residualize(x, controls, names);
  const Vector ry = ols_residualize(y, controls, names);
  // Residuals at rounding level mean the controls explain everything.
  auto spread = [](const Vector& v) { return (v.array() - stats::mean(v)).matrix().norm(); };
  detail::check_computable(rx.norm() > 1e-10 * std::max(spread(x), 1e-300), "partial_correlation: x has zero residual variance");
  detail::check_computable(ry.norm() > 1e-10 * std::max(spread(y), 1e-300), "partial_correlation: y has zero residual variance");
  return stats::pearson(rx, ry);
}

/// First PLS component of the centered embeddings against a centered
/// scalar covariate: normalize(Xc' yc). raw_norm is the length of the
/// cross-covariance with the standardized covariate, in embedding units.
inline Direction pls1_direction(const EmbeddingMatrix& emb, const Vector& covariate, std::string axis_id = "caps_PLS") {
  emb.validate();
  detail::require(covariate.size() == emb.n(), "pls1_direction: covariate length does not match embedding rows");
  detail::require(emb.n() >= 2, "pls1_direction: need at least two rows");
  const double ym = stats::mean(covariate);
  const Vector yc = covariate.array() - ym;
  const double ysd = std::sqrt(yc.squaredNorm() / static_cast<double>(yc.size()));
  detail::check_computable(ysd > 0.0, "pls1_direction: covariate is constant");
  const Vector xm = stats::column_means(emb.data);
  Vector cross = Vector::Zero(emb.h());
  for (Eigen::Index j = 0; j < emb.h(); ++j) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < emb.n(); ++i) s.add((emb.data(i, j) - xm(j)) * yc(i));
    cross(j) = s.value();
  }
  const Vector cov = cross / (static_cast<double>(emb.n()) * ysd);
  Direction d = Direction::from_vector(cov, std::move(axis_id), "pls1(" + emb.cell_id + ")");
  d.weak = d.raw_norm < kWeakAxisRatio * detail::median_row_norm(emb.data, RowMatrix(0, emb.h()));
  return d;
}

/// exp(Shannon entropy) of the normalized eigenvalue spectrum of the
/// centered covariance.
inline double effective_rank(const EmbeddingMatrix& emb) {
  emb.validate();
  detail::require(emb.n() >= 2, "effective_rank: need at least two rows");
  const Vector m = stats::column_means(emb.data);
  const Matrix centered = emb.data.rowwise() - m.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(emb.n() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  detail::check_computable(es.info() == Eigen::Success, "effective_rank: eigensolver failed");
  const Vector lambda = es.eigenvalues().cwiseMax(0.0);
  const double total = lambda.sum();
  detail::check_computable(total > 0.0, "effective_rank: zero covariance (all rows identical)");
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double p = lambda(k) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

/// Partial R^2 of the focal columns given the controls:
/// (SSR_controls - SSR_controls+focal) / SSR_controls. Focal columns that
/// lie in the span of the controls contribute exactly nothing.
inline double joint_partial_r2(const Vector& target, const Matrix& focal, const Matrix& controls) {
  detail::require(focal.rows() == target.size(), "joint_partial_r2: focal length mismatch");
  detail::require(controls.cols() == 0 || controls.rows() == target.size(), "joint_partial_r2: controls length mismatch");
  detail::require(focal.cols() >= 1, "joint_partial_r2: no focal column");
  const Vector ry = ols_residualize(target, controls);
  const double ssr_reduced = ry.squaredNorm();
  detail::check_computable(ssr_reduced > 0.0, "joint_partial_r2: target lies in the span of the controls");

  Matrix rf(focal.rows(), focal.cols());
  for (Eigen::Index j = 0; j < focal.cols(); ++j) rf.col(j) = ols_residualize(focal.col(j), controls);
  // Keep only residual focal directions with real support.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < rf.cols(); ++j) {
    const double scale = std::max(focal.col(j).norm(), 1e-300);
    if (rf.col(j).norm() > 1e-10 * scale) keep.push_back(j);
  }
  if (keep.empty()) return 0.0;
  Matrix kept(rf.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = rf.col(keep[k]);
  detail::check_computable(detail::numeric_rank(kept) == kept.cols(), "joint_partial_r2: focal columns are collinear");
  Eigen::ColPivHouseholderQR<Matrix> qr(kept);
  const Vector resid = ry - kept * qr.solve(ry);
  return std::clamp((ssr_reduced - resid.squaredNorm()) / ssr_reduced, 0.0, 1.0);
}

inline double joint_partial_r2(const Vector& target, const Vector& focal, const Matrix& controls) {
  return joint_partial_r2(target, Matrix(focal), controls);
}

}  // namespace axislab
