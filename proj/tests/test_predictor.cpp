#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace axislab;
using axislab::testing::axis_of;
using axislab::testing::basis;
using axislab::testing::emb_of;
using axislab::testing::gaussian_rows;
using axislab::testing::gaussian_vector;
using axislab::testing::vec;

namespace {

const SyntheticCell& planted() {
  static const SyntheticCell sc = generate(planted_bias_cell_spec(7, "mlp"));
  return sc;
}

}  // namespace

TEST(Ablation, WorkedExample) {
  const Vector out = apply_ablation(vec({1, 1}), axis_of(basis(2, 0)), 0.5);
  EXPECT_DOUBLE_EQ(out(0), 0.5);
  EXPECT_DOUBLE_EQ(out(1), 1.0);
}

TEST(Ablation, FullAblationIsIdempotentAndOrthogonal) {
  const Direction d = axis_of(gaussian_vector(16, 3));
  const RowMatrix rows = gaussian_rows(40, 16, 4);
  const RowMatrix once = ablate_rows(rows, d, 1.0);
  const RowMatrix twice = ablate_rows(once, d, 1.0);
  EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((once * d.unit).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ablation, DimensionMismatchIsValidationError) {
  EXPECT_THROW(apply_ablation(vec({1, 2, 3}), axis_of(basis(2, 0)), 0.5), ValidationError);
}

TEST(Predictor, WorkedExample) {
  // proj 2, grad alignment 1, eps 0.5: -0.5 * 2 * 1.
  HeadModel head(LinearHead{vec({1, 0}), 0.0});
  EXPECT_DOUBLE_EQ(predict_delta_logit(vec({2, 1}), axis_of(basis(2, 0)), head, 0.5), -1.0);
}

TEST(Predictor, ExactForLinearHeads) {
  const Eigen::Index h = 24;
  HeadModel head(LinearHead{gaussian_vector(h, 1), 0.3});
  const Direction d = axis_of(gaussian_vector(h, 2));
  const auto emb = emb_of(gaussian_rows(60, h, 3));
  for (double eps = -2.0; eps <= 2.0 + 1e-12; eps += 0.25) {
    for (Eigen::Index i = 0; i < emb.n(); ++i) {
      const Vector cls = emb.data.row(i).transpose();
      const double p = predict_delta_logit(cls, d, head, eps);
      const double m = measure_delta_logit(cls, d, head, eps);
      EXPECT_NEAR(p, m, 1e-12 * (1.0 + std::abs(m)));
    }
  }
}

TEST(Predictor, LinearR2IsOne) {
  const Eigen::Index h = 24;
  HeadModel head(LinearHead{gaussian_vector(h, 5), 0.0});
  const auto rec = predict_pool(emb_of(gaussian_rows(100, h, 6)), axis_of(gaussian_vector(h, 7)), head, 0.6);
  ASSERT_TRUE(rec.r2.has_value());
  EXPECT_GE(*rec.r2, 1.0 - 1e-12);
}

TEST(Predictor, SignLaw) {
  // Sign of the prediction is -sign(eps) * sign(proj) * sign(alignment).
  const Eigen::Index h = 10;
  HeadModel head(LinearHead{gaussian_vector(h, 8), 0.0});
  const Direction d = axis_of(gaussian_vector(h, 9));
  const auto emb = emb_of(gaussian_rows(50, h, 10));
  for (double eps : {-0.5, 0.5}) {
    const auto rec = predict_pool(emb, d, head, eps);
    for (Eigen::Index i = 0; i < emb.n(); ++i) {
      const double s = -eps * rec.projection(i) * rec.gradient_alignment(i);
      EXPECT_EQ(std::signbit(rec.predicted(i)), std::signbit(s));
    }
  }
}

TEST(Predictor, NegatedDirectionGivesSamePrediction) {
  HeadModel head(LinearHead{gaussian_vector(8, 11), 0.0});
  const Direction d = axis_of(gaussian_vector(8, 12));
  const Vector cls = gaussian_vector(8, 13);
  EXPECT_NEAR(predict_delta_logit(cls, d, head, 0.4), predict_delta_logit(cls, d.negated(), head, 0.4), 1e-14);
}

TEST(Predictor, ZeroEpsilonIsExactlyZero) {
  const auto& sc = planted();
  const auto& p = sc.cell.pool("HC3-AI");
  const auto rec = predict_pool(p.emb, sc.planted.at("typ_HC3"), sc.cell.head_for(p), 0.0);
  for (double v : rec.predicted) {
    EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(std::signbit(v));
  }
  for (double v : *rec.measured) EXPECT_EQ(v, 0.0);
}

TEST(Predictor, MlpTaylorErrorSmallAtModestEps) {
  const auto& sc = planted();
  const auto& p = sc.cell.pool("HC3-AI");
  const auto rows = taylor_table(p.emb, sc.planted.at("typ_HC3"), sc.cell.head_for(p), {0.1, -0.1, 0.5, 0.7});
  for (const auto& r : rows) {
    EXPECT_TRUE(r.within_band);
    EXPECT_LE(r.median_relative_error, 0.05) << "eps " << r.epsilon;
  }
}

TEST(Predictor, MlpErrorIsSecondOrder) {
  const auto& sc = planted();
  const auto& p = sc.cell.pool("HC3-AI");
  const std::vector<double> grid{0.025, 0.05, 0.1, 0.2};
  const auto rows = taylor_table(p.emb, sc.planted.at("typ_HC3"), sc.cell.head_for(p), grid);
  std::vector<double> err;
  for (const auto& r : rows) err.push_back(r.median_absolute_error);
  EXPECT_GE(log_log_slope(grid, err), 1.8);
}

TEST(Predictor, BundleHeadPredictsButDoesNotMeasure) {
  const auto& sc = planted();
  const auto bundles = export_jacobians(sc.cell);
  const auto& p = sc.cell.pool("Cp1");
  HeadModel bundle(bundles.at("Cp1"));
  const Direction& d = sc.planted.at("class");
  const auto a = predict_pool(p.emb, d, bundle, 0.3);
  const auto b = predict_pool(p.emb, d, sc.cell.head_for(p), 0.3);
  EXPECT_FALSE(a.measured.has_value());
  EXPECT_LE((a.predicted - b.predicted).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(measure_delta_logit(p.emb.data.row(0).transpose(), d, bundle, 0.3), ValidationError);
}

TEST(FitR2, Examples) {
  EXPECT_DOUBLE_EQ(fit_r2(vec({1, 2, 3}), vec({1, 2, 3})), 1.0);
  // Predicting the mean everywhere gives zero.
  EXPECT_DOUBLE_EQ(fit_r2(vec({2, 2, 2}), vec({1, 2, 3})), 0.0);
  EXPECT_LT(fit_r2(vec({3, 2, 1}), vec({1, 2, 3})), 0.0);
  EXPECT_THROW(fit_r2(vec({1}), vec({1})), ValidationError);
  EXPECT_THROW(fit_r2(vec({1, 2}), vec({1, 1})), ComputationError);
}

TEST(RandomDirections, DeterministicUnitAndOrthogonal) {
  const Direction ref = axis_of(gaussian_vector(32, 1));
  const auto a = sample_random_directions(32, 5, 3, &ref);
  const auto b = sample_random_directions(32, 5, 3, &ref);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].unit, b[j].unit);
    EXPECT_NEAR(a[j].unit.norm(), 1.0, 1e-12);
    EXPECT_LE(std::abs(a[j].unit.dot(ref.unit)), 1e-9);
  }
  const Direction ref1 = axis_of(vec({1.0}));
  EXPECT_THROW(sample_random_directions(1, 2, 0, &ref1), ValidationError);
}

TEST(RandomNull, PlantedAxisDominatesNull) {
  const auto& sc = planted();
  const auto base = baseline_scores(sc.cell);
  const double planted_shift = std::abs(ablation_delta_fpr(sc.cell, sc.planted.at("typ_HC3"), 0.7, base));
  const auto null = random_axis_null(sc.cell, 0.7, 20, 7);
  EXPECT_EQ(null.delta_fpr.size(), 20u);
  EXPECT_LT(null.max_abs_delta_fpr, planted_shift / 5.0);
}

TEST(LogLogSlope, RecoversPowerLaw) {
  EXPECT_NEAR(log_log_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
  EXPECT_THROW(log_log_slope({1, 2}, {0, 1}), ComputationError);
}
