#pragma once

// Score-level metrics. Decision rule everywhere: score >= tau -> positive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "axislab/error.hpp"
#include "axislab/stats.hpp"

namespace axislab {

enum class PoolRole { positive, negative };

inline const char* to_string(PoolRole r) { return r == PoolRole::positive ? "positive" : "negative"; }

/// Rate of one pool at the block's threshold: TPR for positive pools,
/// FPR for negative pools.
struct PoolRate {
  PoolRole role = PoolRole::positive;
  double rate = 0.0;
  std::size_t n = 0;
};

/// Metric block of one detector state. auroc and the headline rates refer
/// to the cell's headline pair (bias-pool negatives vs in-domain
/// positives); pools carries every pool, including the held-out positive
/// pools Cp1..Cp4 used as recall guards.
struct MetricBlock {
  double auroc = 0.5;
  double fpr_at_tau = 0.0;
  double tpr_at_tau = 0.0;
  double tau = 0.0;
  std::map<std::string, PoolRate> pools;

  double pool_rate(const std::string& pool) const {
    auto it = pools.find(pool);
    detail::require(it != pools.end(), "metric block has no pool '" + pool + "'");
    return it->second.rate;
  }

  void validate() const {
    detail::require(std::isfinite(tau), "metric block: tau must be finite");
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    detail::require(in01(auroc) && in01(fpr_at_tau) && in01(tpr_at_tau), "metric block: rates must lie in [0,1]");
    for (const auto& [k, v] : pools) detail::require(in01(v.rate), "metric block: pool '" + k + "' rate outside [0,1]");
  }
};

struct EffectSummary {
  double cohens_d = 0.0;
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::size_t n_pairs = 0;
};

namespace detail {

inline void require_nonempty(const Vector& v, const char* what) {
  require(v.size() > 0, std::string(what) + ": empty pool");
  require(v.allFinite(), std::string(what) + ": non-finite score");
}

}  // namespace detail

/// Mann-Whitney AUROC, P(pos > neg) + 1/2 P(tie), from tie-grouped rank
/// statistics in O((n + m) log(n + m)).
inline double auroc(const Vector& pos, const Vector& neg) {
  detail::require_nonempty(pos, "auroc");
  detail::require_nonempty(neg, "auroc");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(static_cast<std::size_t>(pos.size() + neg.size()));
  for (double s : pos) items.push_back({s, true});
  for (double s : neg) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  // Twice the U statistic stays an exact integer.
  std::uint64_t twice_u = 0;
  std::uint64_t neg_below = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    std::uint64_t p_group = 0;
    std::uint64_t n_group = 0;
    while (j < items.size() && items[j].score == items[i].score) {
      (items[j].positive ? p_group : n_group) += 1;
      ++j;
    }
    twice_u += p_group * (2 * neg_below + n_group);
    neg_below += n_group;
    i = j;
  }
  const double pairs = static_cast<double>(pos.size()) * static_cast<double>(neg.size());
  return static_cast<double>(twice_u) / (2.0 * pairs);
}

/// Fraction of scores with score >= tau.
inline double rate_at(const Vector& scores, double tau) {
  detail::require_nonempty(scores, "rate_at");
  std::size_t k = 0;
  for (double s : scores)
    if (s >= tau) ++k;
  return static_cast<double>(k) / static_cast<double>(scores.size());
}

namespace detail {

// Smallest count k with k / n >= target, guarding against 0.9 * n landing a
// hair above an integer.
inline std::size_t min_count_for_rate(double target, std::size_t n) {
  const double raw = target * static_cast<double>(n);
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) <= 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(rounded);
  return static_cast<std::size_t>(std::ceil(raw));
}

inline std::size_t max_count_for_rate(double target, std::size_t n) {
  const double raw = target * static_cast<double>(n);
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) <= 1e-9 * std::max(1.0, raw)) return static_cast<std::size_t>(rounded);
  return static_cast<std::size_t>(std::floor(raw));
}

inline std::vector<double> sorted_descending(const Vector& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

}  // namespace detail

/// Largest tau with TPR(pos, tau) >= target_tpr: the k-th largest score,
/// k = ceil(target * |pos|). Without ties the achieved TPR is k / |pos|.
inline double matched_tpr_threshold(const Vector& pos, double target_tpr) {
  detail::require_nonempty(pos, "matched_tpr_threshold");
  detail::require(target_tpr > 0.0 && target_tpr < 1.0, "matched_tpr_threshold: target must lie in (0,1)");
  const auto sorted = detail::sorted_descending(pos);
  const std::size_t k = std::max<std::size_t>(1, detail::min_count_for_rate(target_tpr, sorted.size()));
  return sorted[k - 1];
}

/// Smallest tau with FPR(neg, tau) <= target_fpr: just above the
/// (floor(target * |neg|) + 1)-th largest negative.
inline double matched_fpr_threshold(const Vector& neg, double target_fpr) {
  detail::require_nonempty(neg, "matched_fpr_threshold");
  detail::require(target_fpr >= 0.0 && target_fpr < 1.0, "matched_fpr_threshold: target must lie in [0,1)");
  const auto sorted = detail::sorted_descending(neg);
  const std::size_t allowed = detail::max_count_for_rate(target_fpr, sorted.size());
  if (allowed >= sorted.size()) return -std::numeric_limits<double>::infinity();
  return std::nextafter(sorted[allowed], std::numeric_limits<double>::infinity());
}

inline double tpr_at_fpr(const Vector& pos, const Vector& neg, double target_fpr) {
  detail::require_nonempty(pos, "tpr_at_fpr");
  return rate_at(pos, matched_fpr_threshold(neg, target_fpr));
}

inline double fpr_at_tpr(const Vector& pos, const Vector& neg, double target_tpr) {
  detail::require_nonempty(neg, "fpr_at_tpr");
  return rate_at(neg, matched_tpr_threshold(pos, target_tpr));
}

/// (mean(a) - mean(b)) / pooled SD with (n - 1)-weighted variances.
inline double cohens_d(const Vector& a, const Vector& b) {
  detail::require(a.size() >= 2 && b.size() >= 2, "cohens_d: each group needs at least two values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * stats::variance(a) + (nb - 1.0) * stats::variance(b)) / (na + nb - 2.0);
  detail::check_computable(pooled > 0.0, "cohens_d: zero pooled variance");
  return (stats::mean(a) - stats::mean(b)) / std::sqrt(pooled);
}

inline EffectSummary effect_summary(const Vector& x, const Vector& y) {
  detail::require(x.size() == y.size(), "effect_summary: length mismatch");
  return {cohens_d(x, y), stats::pearson(x, y), stats::spearman(x, y), static_cast<std::size_t>(x.size())};
}

/// Standardised-effect amplification: (delta_logit_ft / sigma_ft) /
/// (delta_proj_raw / sigma_proj_raw).
inline double k_std(double delta_logit_ft, double sigma_ft, double delta_proj_raw, double sigma_proj_raw) {
  detail::require(sigma_ft > 0.0 && sigma_proj_raw > 0.0, "k_std: standard deviations must be positive");
  detail::check_computable(delta_proj_raw != 0.0, "k_std: zero raw projection effect");
  return (delta_logit_ft / sigma_ft) / (delta_proj_raw / sigma_proj_raw);
}

/// Scores of one detector variant on the headline pair.
struct DetectorScores {
  Vector positives;  // in-domain positives (sets the matched threshold)
  Vector negatives;  // bias-pool negatives
  double default_tau = 0.0;
};

/// Headline block of a detector at a given threshold.
inline MetricBlock headline_block(const DetectorScores& s, double tau) {
  MetricBlock b;
  b.auroc = auroc(s.positives, s.negatives);
  b.tau = tau;
  b.tpr_at_tau = rate_at(s.positives, tau);
  b.fpr_at_tau = rate_at(s.negatives, tau);
  b.pools["negatives"] = {PoolRole::negative, b.fpr_at_tau, static_cast<std::size_t>(s.negatives.size())};
  b.pools["positives"] = {PoolRole::positive, b.tpr_at_tau, static_cast<std::size_t>(s.positives.size())};
  return b;
}

struct MetricBlockPair {
  MetricBlock a;
  MetricBlock b;
};

struct CalibrationShare {
  double share = 0.0;
  double delta_fpr_default = 0.0;
  double delta_fpr_matched = 0.0;
  double delta_auroc = 0.0;
  MetricBlockPair at_default;
  MetricBlockPair at_matched;
};

/// Fraction of the default-threshold FPR gap between two variants that
/// vanishes under matched-TPR thresholds:
/// 1 - |dFPR matched| / |dFPR default|, clamped to [0,1].
inline CalibrationShare calibration_share(const MetricBlockPair& at_default, const MetricBlockPair& at_matched) {
  CalibrationShare out;
  out.at_default = at_default;
  out.at_matched = at_matched;
  out.delta_fpr_default = at_default.b.fpr_at_tau - at_default.a.fpr_at_tau;
  out.delta_fpr_matched = at_matched.b.fpr_at_tau - at_matched.a.fpr_at_tau;
  out.delta_auroc = at_matched.b.auroc - at_matched.a.auroc;
  detail::check_computable(out.delta_fpr_default != 0.0, "calibration_share: zero default-threshold FPR gap");
  out.share = std::clamp(1.0 - std::abs(out.delta_fpr_matched) / std::abs(out.delta_fpr_default), 0.0, 1.0);
  return out;
}

/// Evaluates both variants at their own default thresholds and at the
/// matched-TPR threshold on their positives, then decomposes the gap.
inline CalibrationShare calibration_share(const DetectorScores& a, const DetectorScores& b, double target_tpr = 0.90) {
  detail::require(a.positives.size() == b.positives.size() && a.negatives.size() == b.negatives.size(),
                  "calibration_share: variants must be evaluated on identical pools");
  MetricBlockPair def{headline_block(a, a.default_tau), headline_block(b, b.default_tau)};
  MetricBlockPair matched{headline_block(a, matched_tpr_threshold(a.positives, target_tpr)),
                          headline_block(b, matched_tpr_threshold(b.positives, target_tpr))};
  return calibration_share(def, matched);
}

/// max - min of per-population FPR at a shared threshold.
inline double fairness_spread(const std::map<std::string, double>& fprs) {
  detail::require(fprs.size() >= 2, "fairness_spread: need at least two populations");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [k, v] : fprs) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

/// Combined spread reduction over the sum of the individual reductions.
inline double super_additivity(double delta_a, double delta_b, double delta_combined) {
  detail::check_computable(delta_a + delta_b != 0.0, "super_additivity: individual reductions sum to zero");
  return delta_combined / (delta_a + delta_b);
}

}  // namespace axislab
