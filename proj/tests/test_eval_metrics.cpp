#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace axislab;
using axislab::testing::brute_auroc;
using axislab::testing::gaussian_vector;
using axislab::testing::normal_cdf;
using axislab::testing::vec;

TEST(Auroc, WorkedExamples) {
  EXPECT_DOUBLE_EQ(auroc(vec({2, 3}), vec({0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(auroc(vec({1, 1}), vec({1, 1})), 0.5);
  EXPECT_DOUBLE_EQ(auroc(vec({1, 2}), vec({0, 1})), 0.875);
}

TEST(Auroc, MatchesBruteForceWithTies) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    CounterRng rng(seed);
    const auto n = static_cast<Eigen::Index>(1 + rng.below(200));
    const auto m = static_cast<Eigen::Index>(1 + rng.below(200));
    Vector pos(n), neg(m);
    // Coarse grid forces plenty of ties.
    for (auto& x : pos) x = std::round(4.0 * rng.normal() + 1.0) / 4.0;
    for (auto& x : neg) x = std::round(4.0 * rng.normal()) / 4.0;
    EXPECT_NEAR(auroc(pos, neg), brute_auroc(pos, neg), 1e-12) << "seed " << seed;
  }
}

TEST(Auroc, ComplementAndMonotoneInvariance) {
  const Vector pos = gaussian_vector(150, 3, 0.5);
  const Vector neg = gaussian_vector(120, 4);
  const double a = auroc(pos, neg);
  EXPECT_NEAR(a + auroc(neg, pos), 1.0, 1e-12);
  const Vector tp = pos.unaryExpr([](double x) { return std::exp(2.0 * x) + 3.0; });
  const Vector tn = neg.unaryExpr([](double x) { return std::exp(2.0 * x) + 3.0; });
  EXPECT_DOUBLE_EQ(auroc(tp, tn), a);
}

TEST(Auroc, EmptyOrNonFiniteIsValidationError) {
  EXPECT_THROW(auroc(Vector(0), vec({1})), ValidationError);
  EXPECT_THROW(auroc(vec({NAN}), vec({1})), ValidationError);
}

TEST(MatchedThreshold, WorkedExamples) {
  Vector p(10);
  for (int i = 0; i < 10; ++i) p(i) = i + 1;
  // k = 9, the 9th largest is the 2nd smallest.
  EXPECT_DOUBLE_EQ(matched_tpr_threshold(p, 0.9), 2.0);
  EXPECT_DOUBLE_EQ(rate_at(p, matched_tpr_threshold(p, 0.9)), 0.9);
  EXPECT_DOUBLE_EQ(matched_tpr_threshold(vec({3, 3, 3, 3}), 0.9), 3.0);
  // One draw has SE ~0.054 at n = 1000, so average twenty.
  double acc = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) acc += matched_tpr_threshold(gaussian_vector(1000, seed), 0.9);
  EXPECT_NEAR(acc / 20.0, -1.2816, 0.05);
}

TEST(MatchedThreshold, AchievedTprWithinOneStep) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(seed) * 7;
    const Vector p = gaussian_vector(n, seed);
    const double tpr = rate_at(p, matched_tpr_threshold(p, 0.9));
    EXPECT_GE(tpr, 0.9 - 1e-12);
    EXPECT_LT(tpr, 0.9 + 1.0 / static_cast<double>(n));
  }
}

TEST(MatchedThreshold, TargetOutsideRangeIsValidationError) {
  EXPECT_THROW(matched_tpr_threshold(vec({1, 2}), 0.0), ValidationError);
  EXPECT_THROW(matched_tpr_threshold(vec({1, 2}), 1.0), ValidationError);
}

TEST(TprAtFpr, GaussianOracle) {
  // Unit-variance shift of 1: TPR at FPR 0.05 is 1 - Phi(1.6449 - 1).
  const Vector pos = gaussian_vector(100000, 21, 1.0);
  const Vector neg = gaussian_vector(100000, 22);
  const double expected = 1.0 - normal_cdf(1.6448536 - 1.0);
  EXPECT_NEAR(tpr_at_fpr(pos, neg, 0.05), expected, 0.02);
  EXPECT_LE(rate_at(neg, matched_fpr_threshold(neg, 0.05)), 0.05);
}

TEST(TprAtFpr, MonotoneInTarget) {
  const Vector pos = gaussian_vector(500, 5, 0.7);
  const Vector neg = gaussian_vector(400, 6);
  double prev = -1.0;
  for (double f : {0.0, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9}) {
    const double t = tpr_at_fpr(pos, neg, f);
    EXPECT_GE(t, prev);
    prev = t;
  }
}

TEST(TprAtFpr, InvariantToPoolOrder) {
  Vector pos = gaussian_vector(300, 7, 0.5);
  Vector neg = gaussian_vector(300, 8);
  const double a = tpr_at_fpr(pos, neg, 0.1);
  const double b = fpr_at_tpr(pos, neg, 0.9);
  std::reverse(pos.begin(), pos.end());
  std::reverse(neg.begin(), neg.end());
  EXPECT_EQ(tpr_at_fpr(pos, neg, 0.1), a);
  EXPECT_EQ(fpr_at_tpr(pos, neg, 0.9), b);
}

TEST(Effects, CohensD) {
  EXPECT_NEAR(cohens_d(vec({2, 4}), vec({0, 2})), 2.0 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(cohens_d(vec({1}), vec({1, 2})), ValidationError);
  EXPECT_THROW(cohens_d(vec({1, 1}), vec({1, 1})), ComputationError);
}

TEST(Effects, KStdExamples) {
  EXPECT_NEAR(k_std(1.72, 1.0, 1.0, 1.0), 1.72, 1e-12);
  EXPECT_NEAR(k_std(0.86, 0.5, 2.0, 2.0), 1.72, 1e-12);
  EXPECT_THROW(k_std(1.0, 0.0, 1.0, 1.0), ValidationError);
  EXPECT_THROW(k_std(1.0, 1.0, 0.0, 1.0), ComputationError);
}

TEST(CalibrationShare, PureShiftIsFullyCalibration) {
  const Vector pos = gaussian_vector(2000, 31, 1.5);
  const Vector neg = gaussian_vector(2000, 32);
  DetectorScores a{pos, neg, 0.0};
  // Same ranking, shifted scores.
  DetectorScores b{(pos.array() + 0.8).matrix(), (neg.array() + 0.8).matrix(), 0.0};
  const auto cs = calibration_share(a, b);
  EXPECT_NEAR(cs.share, 1.0, 1e-9);
  EXPECT_NEAR(cs.delta_auroc, 0.0, 1e-12);
  EXPECT_GT(cs.delta_fpr_default, 0.1);
}

TEST(CalibrationShare, MonotoneTransformInvariance) {
  const Vector pos = gaussian_vector(1000, 33, 1.0);
  const Vector neg = gaussian_vector(1000, 34);
  auto f = [](double x) { return 3.0 * std::tanh(0.7 * x) + 0.4; };
  DetectorScores a{pos, neg, 0.0};
  DetectorScores b{pos.unaryExpr(f), neg.unaryExpr(f), 0.0};
  EXPECT_NEAR(calibration_share(a, b).share, 1.0, 1e-9);
}

TEST(CalibrationShare, RankingChangeIsZeroShare) {
  // Default FPR gap equals the matched FPR gap: nothing is calibration.
  MetricBlock a0, b0, a1, b1;
  a0.fpr_at_tau = 0.10;
  b0.fpr_at_tau = 0.30;
  a1.fpr_at_tau = 0.10;
  b1.fpr_at_tau = 0.30;
  const auto cs = calibration_share(MetricBlockPair{a0, b0}, MetricBlockPair{a1, b1});
  EXPECT_DOUBLE_EQ(cs.share, 0.0);
}

TEST(CalibrationShare, MostlyCalibrationScenario) {
  const Vector pos = gaussian_vector(5000, 35, 2.0);
  const Vector neg = gaussian_vector(5000, 36);
  DetectorScores a{pos, neg, 0.5};
  // Slight rank noise on top of a large shift.
  Vector pn = pos, nn = neg;
  const Vector e1 = gaussian_vector(5000, 37, 0.0, 0.02);
  const Vector e2 = gaussian_vector(5000, 38, 0.0, 0.02);
  pn.array() += 1.0 + e1.array();
  nn.array() += 1.0 + e2.array();
  DetectorScores b{pn, nn, 0.5};
  EXPECT_GE(calibration_share(a, b).share, 0.97);
}

TEST(CalibrationShare, ZeroDefaultGapIsComputationError) {
  MetricBlock a;
  a.fpr_at_tau = 0.2;
  EXPECT_THROW(calibration_share(MetricBlockPair{a, a}, MetricBlockPair{a, a}), ComputationError);
}

TEST(Fairness, SpreadAndSuperAdditivity) {
  EXPECT_NEAR(fairness_spread({{"a", 0.10}, {"b", 0.03}, {"c", 0.05}}), 0.07, 1e-12);
  EXPECT_THROW(fairness_spread({{"a", 0.1}}), ValidationError);
  EXPECT_NEAR(super_additivity(0.04, 0.06, 0.21), 2.10, 1e-12);
  EXPECT_THROW(super_additivity(0.1, -0.1, 0.2), ComputationError);
}

TEST(MetricBlock, HeadlineBlockRates) {
  DetectorScores s{vec({1, 2, 3, 4}), vec({-1, 0, 2}), 2.0};
  const auto b = headline_block(s, 2.0);
  EXPECT_DOUBLE_EQ(b.tpr_at_tau, 0.75);
  EXPECT_DOUBLE_EQ(b.fpr_at_tau, 1.0 / 3.0);
  EXPECT_EQ(b.pools.at("negatives").n, 3u);
}
