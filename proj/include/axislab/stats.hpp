#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "axislab/error.hpp"

namespace axislab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Neumaier-compensated running sum. Fixed iteration order keeps every
// reduction bit-reproducible.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace stats {

inline double sum(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value();
}

inline double mean(std::span<const double> v) {
  detail::require(!v.empty(), "mean of an empty vector");
  return sum(v) / static_cast<double>(v.size());
}

inline double mean(const Vector& v) { return mean(std::span<const double>(v.data(), v.size())); }

// Sample variance (n - 1 denominator), two-pass.
inline double variance(std::span<const double> v) {
  detail::require(v.size() >= 2, "variance needs at least two values");
  const double m = mean(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(v.size() - 1);
}

inline double variance(const Vector& v) { return variance(std::span<const double>(v.data(), v.size())); }

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }
inline double stddev(const Vector& v) { return std::sqrt(variance(v)); }

// Column means of a row-per-sample matrix with compensated accumulation.
inline Vector column_means(const RowMatrix& x) {
  detail::require(x.rows() > 0, "column means of an empty matrix");
  Vector out(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s.add(x(i, j));
    out(j) = s.value() / static_cast<double>(x.rows());
  }
  return out;
}

inline double pearson(const Vector& x, const Vector& y) {
  detail::require(x.size() == y.size(), "pearson: length mismatch");
  detail::require(x.size() >= 2, "pearson: need at least two pairs");
  const double mx = mean(x);
  const double my = mean(y);
  CompensatedSum sxy, sxx, syy;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double dx = x(i) - mx;
    const double dy = y(i) - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double denom = std::sqrt(sxx.value() * syy.value());
  detail::check_computable(denom > 0.0, "correlation undefined: zero variance");
  return std::clamp(sxy.value() / denom, -1.0, 1.0);
}

// 1-based ranks, ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const Vector& x, const Vector& y) {
  detail::require(x.size() == y.size(), "spearman: length mismatch");
  const auto rx = average_ranks(std::span<const double>(x.data(), x.size()));
  const auto ry = average_ranks(std::span<const double>(y.data(), y.size()));
  return pearson(Eigen::Map<const Vector>(rx.data(), rx.size()), Eigen::Map<const Vector>(ry.data(), ry.size()));
}

// Linear-interpolation quantile (type 7); q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  detail::require(!v.empty(), "quantile of an empty vector");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(std::span<const double> v) { return Eigen::Map<const Vector>(v.data(), v.size()); }

}  // namespace stats
}  // namespace axislab
