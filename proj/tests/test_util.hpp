#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "axislab/axislab.hpp"

namespace axislab::testing {

inline RowMatrix gaussian_rows(Eigen::Index n, Eigen::Index h, std::uint64_t seed, double sd = 1.0,
                               const Vector* mean = nullptr, std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  RowMatrix out(n, h);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < h; ++j) out(i, j) = sd * rng.normal() + (mean ? (*mean)(j) : 0.0);
  return out;
}

inline Vector gaussian_vector(Eigen::Index n, std::uint64_t seed, double mu = 0.0, double sd = 1.0, std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = mu + sd * rng.normal();
  return v;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vector basis(Eigen::Index h, Eigen::Index k) {
  Vector v = Vector::Zero(h);
  v(k) = 1.0;
  return v;
}

inline Direction axis_of(const Vector& v, std::string id = "class") { return Direction::from_vector(v, std::move(id)); }

inline EmbeddingMatrix emb_of(RowMatrix data, std::string id = "test") { return EmbeddingMatrix::from(std::move(data), std::move(id)); }

// O(n*m) pairwise AUROC with ties counted one half.
inline double brute_auroc(const Vector& pos, const Vector& neg) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pos.size(); ++i)
    for (Eigen::Index j = 0; j < neg.size(); ++j) s += pos(i) > neg(j) ? 1.0 : (pos(i) == neg(j) ? 0.5 : 0.0);
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("axislab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace axislab::testing
