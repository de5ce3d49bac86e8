#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "axislab/core_geometry.hpp"
#include "axislab/error.hpp"

namespace axislab {

/// logit = <weight, cls> + bias. The logit is the AI-minus-human logit
/// difference.
struct LinearHead {
  Vector weight;
  double bias = 0.0;
};

/// Two-layer tanh MLP: logit = <w2, tanh(w1 cls + b1)> + b2. Toy stand-in
/// for a nonlinear classifier head; evaluable and differentiable in-process.
struct MlpHead {
  Matrix w1;  // hidden x h
  Vector b1;
  Vector w2;
  double b2 = 0.0;
};

/// Per-text gradient rows exported by an extractor for one pool, with the
/// baseline logit of each text. Not evaluable away from the baseline.
struct JacobianBundle {
  RowMatrix rows;
  Vector baseline_logit;
};

enum class HeadKind { linear, mlp, jacobian_bundle };

inline const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::linear: return "linear";
    case HeadKind::mlp: return "mlp";
    case HeadKind::jacobian_bundle: return "jacobian_bundle";
  }
  return "?";
}

class HeadModel {
 public:
  HeadModel() = default;
  HeadModel(LinearHead h) : impl_(std::move(h)) { validate(); }
  HeadModel(MlpHead h) : impl_(std::move(h)) { validate(); }
  HeadModel(JacobianBundle h) : impl_(std::move(h)) { validate(); }

  HeadKind kind() const { return static_cast<HeadKind>(impl_.index()); }
  bool evaluable() const { return kind() != HeadKind::jacobian_bundle; }

  const LinearHead& linear() const { return std::get<LinearHead>(impl_); }
  const MlpHead& mlp() const { return std::get<MlpHead>(impl_); }
  const JacobianBundle& bundle() const { return std::get<JacobianBundle>(impl_); }

  Eigen::Index h() const {
    switch (kind()) {
      case HeadKind::linear: return linear().weight.size();
      case HeadKind::mlp: return mlp().w1.cols();
      case HeadKind::jacobian_bundle: return bundle().rows.cols();
    }
    return 0;
  }

  /// Logit at cls. `row` indexes the text for jacobian bundles, which can
  /// only report their stored baseline.
  double logit(const Vector& cls, Eigen::Index row = -1) const {
    switch (kind()) {
      case HeadKind::linear: {
        detail::require_same_h(cls.size(), h(), "head logit");
        return linear().weight.dot(cls) + linear().bias;
      }
      case HeadKind::mlp: {
        detail::require_same_h(cls.size(), h(), "head logit");
        const auto& m = mlp();
        const Vector hidden = (m.w1 * cls + m.b1).array().tanh();
        return m.w2.dot(hidden) + m.b2;
      }
      case HeadKind::jacobian_bundle: {
        require_row(row);
        return bundle().baseline_logit(row);
      }
    }
    return 0.0;
  }

  /// d logit / d cls at cls (the per-text head Jacobian row).
  Vector gradient(const Vector& cls, Eigen::Index row = -1) const {
    switch (kind()) {
      case HeadKind::linear: return linear().weight;
      case HeadKind::mlp: {
        detail::require_same_h(cls.size(), h(), "head gradient");
        const auto& m = mlp();
        const Vector t = (m.w1 * cls + m.b1).array().tanh();
        const Vector scale = m.w2.array() * (1.0 - t.array().square());
        return m.w1.transpose() * scale;
      }
      case HeadKind::jacobian_bundle: {
        require_row(row);
        return bundle().rows.row(row).transpose();
      }
    }
    return {};
  }

  void validate() const {
    switch (kind()) {
      case HeadKind::linear:
        detail::require(linear().weight.size() >= 1 && linear().weight.allFinite() && std::isfinite(linear().bias),
                        "linear head: weights must be finite");
        break;
      case HeadKind::mlp: {
        const auto& m = mlp();
        detail::require(m.w1.rows() >= 1 && m.w1.cols() >= 1, "mlp head: invalid widths");
        detail::require(m.b1.size() == m.w1.rows() && m.w2.size() == m.w1.rows(), "mlp head: layer widths disagree");
        detail::require(m.w1.allFinite() && m.b1.allFinite() && m.w2.allFinite() && std::isfinite(m.b2),
                        "mlp head: parameters must be finite");
        break;
      }
      case HeadKind::jacobian_bundle: {
        const auto& b = bundle();
        detail::require(b.rows.rows() == b.baseline_logit.size(), "jacobian bundle: one baseline logit per row required");
        detail::require(b.rows.allFinite() && b.baseline_logit.allFinite(), "jacobian bundle: values must be finite");
        break;
      }
    }
  }

 private:
  void require_row(Eigen::Index row) const {
    detail::require(row >= 0 && row < bundle().rows.rows(),
                    "jacobian bundle: missing Jacobian row " + std::to_string(row) + " (bundle has " +
                        std::to_string(bundle().rows.rows()) + ")");
  }

  std::variant<LinearHead, MlpHead, JacobianBundle> impl_;
};

/// Logits of every row of a pool.
inline Vector score_rows(const HeadModel& head, const RowMatrix& rows) {
  Vector out(rows.rows());
  if (head.kind() == HeadKind::linear) {
    detail::require_same_h(rows.cols(), head.h(), "score_rows");
    out = rows * head.linear().weight;
    out.array() += head.linear().bias;
    return out;
  }
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out(i) = head.logit(rows.row(i).transpose(), i);
  return out;
}

}  // namespace axislab
