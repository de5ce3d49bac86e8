#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace axislab;
using axislab::testing::gaussian_rows;
using axislab::testing::gaussian_vector;
using axislab::testing::vec;

namespace {

MlpHead random_mlp(Eigen::Index h, Eigen::Index hidden, std::uint64_t seed) {
  MlpHead m;
  m.w1 = gaussian_rows(hidden, h, seed, 0.3);
  m.b1 = gaussian_vector(hidden, seed + 1, 0.0, 0.1);
  m.w2 = gaussian_vector(hidden, seed + 2);
  m.b2 = 0.25;
  return m;
}

}  // namespace

TEST(Head, LinearLogitAndGradient) {
  HeadModel head(LinearHead{vec({1, -2, 0.5}), 0.5});
  EXPECT_DOUBLE_EQ(head.logit(vec({1, 1, 2})), 0.5);
  EXPECT_EQ(head.gradient(vec({9, 9, 9})), vec({1, -2, 0.5}));
  EXPECT_EQ(head.h(), 3);
  EXPECT_THROW(head.logit(vec({1, 1})), ValidationError);
}

TEST(Head, MlpGradientMatchesFiniteDifferences) {
  HeadModel head(random_mlp(12, 7, 5));
  const Vector x = gaussian_vector(12, 9);
  const Vector g = head.gradient(x);
  const double step = 1e-6;
  for (Eigen::Index j = 0; j < 12; ++j) {
    Vector up = x, dn = x;
    up(j) += step;
    dn(j) -= step;
    EXPECT_NEAR(g(j), (head.logit(up) - head.logit(dn)) / (2 * step), 1e-7) << "coordinate " << j;
  }
}

TEST(Head, ScoreRowsMatchesPerRowLogit) {
  HeadModel head(random_mlp(6, 4, 11));
  const RowMatrix rows = gaussian_rows(5, 6, 12);
  const Vector s = score_rows(head, rows);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(s(i), head.logit(rows.row(i).transpose()), 1e-12);
}

TEST(Head, BundleServesStoredRowsOnly) {
  JacobianBundle b{gaussian_rows(3, 4, 2), vec({0.1, 0.2, 0.3})};
  HeadModel head(b);
  EXPECT_FALSE(head.evaluable());
  EXPECT_DOUBLE_EQ(head.logit(Vector::Zero(4), 1), 0.2);
  EXPECT_EQ(head.gradient(Vector::Zero(4), 2), b.rows.row(2).transpose());
  try {
    head.gradient(Vector::Zero(4), 3);
    FAIL() << "expected a missing-row error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing Jacobian row 3"), std::string::npos);
  }
}

TEST(Head, InvalidParametersRejected) {
  EXPECT_THROW(HeadModel(LinearHead{vec({1, NAN}), 0.0}), ValidationError);
  MlpHead m = random_mlp(4, 3, 1);
  m.w2 = vec({1, 2});
  EXPECT_THROW(HeadModel{m}, ValidationError);
  EXPECT_THROW(HeadModel(JacobianBundle{gaussian_rows(3, 4, 2), vec({0.1})}), ValidationError);
}
