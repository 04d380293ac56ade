#include <gtest/gtest.h>

#include <vector>

#include "segstat/metrics.hpp"
#include "test_support.hpp"

namespace segstat {
namespace {

ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  return {tp, fp, tn, fn};
}

TEST(Formulas, WorkedExample) {
  const auto c = counts(30, 10, 50, 10);
  EXPECT_DOUBLE_EQ(*sensitivity(c).value, 0.75);
  EXPECT_DOUBLE_EQ(*specificity(c).value, 50.0 / 60.0);
  EXPECT_DOUBLE_EQ(*dice(c).value, 0.75);
  EXPECT_DOUBLE_EQ(*precision(c).value, 0.75);
  EXPECT_FALSE(dice(c).degenerate);
}

TEST(Formulas, SmallCounts) {
  EXPECT_DOUBLE_EQ(*sensitivity(counts(16, 0, 0, 0)).value, 1.0);
  EXPECT_DOUBLE_EQ(*sensitivity(counts(3, 0, 0, 1)).value, 0.75);
  EXPECT_DOUBLE_EQ(*specificity(counts(0, 0, 100, 0)).value, 1.0);
  EXPECT_DOUBLE_EQ(*specificity(counts(0, 3, 1, 0)).value, 0.25);
  const auto c = counts(2, 2, 0, 2);
  EXPECT_DOUBLE_EQ(*dice(c).value, 0.5);
  const double p = *precision(c).value, r = *sensitivity(c).value;
  EXPECT_DOUBLE_EQ(*dice(c).value, 2 * p * r / (p + r));
}

TEST(Formulas, AllBackgroundImage) {
  const BinaryMask gt({6, 6}, std::uint8_t{0});
  const auto m = evaluate_image(gt, gt, ProbabilityMap({6, 6}, 0.1));
  EXPECT_EQ(m.sensitivity, (MetricValue{1.0, true}));
  EXPECT_EQ(m.dice, (MetricValue{1.0, true}));
  EXPECT_EQ(m.specificity, (MetricValue{1.0, false}));
  EXPECT_FALSE(m.auroc.present());
  EXPECT_TRUE(m.auroc.degenerate);
}

TEST(Formulas, PerfectAndDisjoint) {
  Rng rng(1);
  const auto gt = testing::random_mask(rng, {10, 10}, 0.3);
  const auto perfect = confusion(gt, gt);
  EXPECT_DOUBLE_EQ(*dice(perfect).value, 1.0);
  EXPECT_DOUBLE_EQ(*sensitivity(perfect).value, 1.0);
  EXPECT_DOUBLE_EQ(*specificity(perfect).value, 1.0);

  BinaryMask inverse(gt.extent());
  for (std::size_t i = 0; i < gt.size(); ++i) inverse[i] = 1 - gt[i];
  const auto disjoint = confusion(gt, inverse);
  EXPECT_DOUBLE_EQ(*dice(disjoint).value, 0.0);
  EXPECT_DOUBLE_EQ(*sensitivity(disjoint).value, 0.0);
  EXPECT_DOUBLE_EQ(*specificity(disjoint).value, 0.0);
}

TEST(Formulas, EmptyDenominatorsAreFlagged) {
  const auto empty = counts(0, 0, 16, 0);
  EXPECT_EQ(dice(empty), (MetricValue{1.0, true}));
  EXPECT_EQ(sensitivity(empty), (MetricValue{1.0, true}));
  EXPECT_FALSE(specificity(empty).degenerate);
  EXPECT_TRUE(specificity(counts(4, 0, 0, 0)).degenerate);
  EXPECT_TRUE(precision(counts(0, 0, 3, 3)).degenerate);
}

TEST(Formulas, RangeAndDiceIdentity) {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Extent e = testing::random_extent(rng, 10);
    const auto gt = testing::random_mask(rng, e, rng.uniform());
    const auto pred = testing::random_mask(rng, e, rng.uniform());
    const auto c = confusion(gt, pred);
    for (const auto& v : {dice(c), sensitivity(c), specificity(c)}) {
      ASSERT_TRUE(v.present());
      EXPECT_GE(*v.value, 0.0);
      EXPECT_LE(*v.value, 1.0);
    }
    const auto s = sensitivity(c), p = precision(c), d = dice(c);
    if (!s.degenerate && !p.degenerate && *s.value + *p.value > 0) {
      EXPECT_NEAR(*d.value, 2 * *p.value * *s.value / (*p.value + *s.value), 1e-12);
    }
  }
}

TEST(Auroc, HandExamples) {
  const BinaryMask gt({4, 1}, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(*auroc(gt, ProbabilityMap({4, 1}, {0.1, 0.2, 0.8, 0.9})).value, 1.0);
  EXPECT_DOUBLE_EQ(*auroc(gt, ProbabilityMap({4, 1}, {0.9, 0.8, 0.2, 0.1})).value, 0.0);
  EXPECT_DOUBLE_EQ(*auroc(gt, ProbabilityMap({4, 1}, 0.5)).value, 0.5);
  EXPECT_DOUBLE_EQ(*auroc(gt, ProbabilityMap({4, 1}, {0.1, 0.8, 0.8, 0.9})).value, 0.875);
}

TEST(Auroc, ProbabilityEqualToGroundTruth) {
  Rng rng(2);
  auto gt = testing::random_mask(rng, {16, 16}, 0.3);
  ProbabilityMap p(gt.extent());
  for (std::size_t i = 0; i < gt.size(); ++i) p[i] = gt[i];
  EXPECT_DOUBLE_EQ(*auroc(gt, p).value, 1.0);
  const auto scores = testing::random_scores(rng, gt.extent(), 1000);
  EXPECT_NEAR(*auroc(gt, scores).value, testing::sweep_auroc(gt, scores), 1e-9);
}

TEST(Auroc, DegenerateGroundTruth) {
  const BinaryMask all({3, 1}, std::uint8_t{1});
  const ProbabilityMap p({3, 1}, {0.2, 0.6, 0.9});
  const auto missing = auroc(all, p);
  EXPECT_FALSE(missing.present());
  EXPECT_TRUE(missing.degenerate);
  const auto acc = auroc(all, p, {DegenerateAurocPolicy::accuracy_at_threshold, 0.5});
  EXPECT_TRUE(acc.degenerate);
  EXPECT_DOUBLE_EQ(*acc.value, 2.0 / 3.0);
}

TEST(Auroc, MatchesThresholdSweep) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const Extent e = testing::random_extent(rng, 14);
    auto gt = testing::random_mask(rng, e, 0.4);
    gt[0] = 1;
    if (gt.size() > 1) gt[1] = 0; else continue;
    const auto p = testing::random_scores(rng, e, 1 + static_cast<int>(rng.below(12)));
    EXPECT_NEAR(*auroc(gt, p).value, testing::sweep_auroc(gt, p), 1e-9);
  }
}

TEST(Auroc, ComplementAndMonotoneInvariance) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Extent e = {8, 6};
    auto gt = testing::random_mask(rng, e, 0.5);
    gt[0] = 1;
    gt[1] = 0;
    const auto p = testing::random_scores(rng, e, 9);
    ProbabilityMap flipped(e), squashed(e);
    for (std::size_t i = 0; i < p.size(); ++i) {
      flipped[i] = 1.0 - p[i];
      squashed[i] = p[i] * p[i] * p[i];
    }
    const double a = *auroc(gt, p).value;
    EXPECT_NEAR(*auroc(gt, flipped).value, 1.0 - a, 1e-12);
    EXPECT_DOUBLE_EQ(*auroc(gt, squashed).value, a);
  }
}

TEST(Auroc, ExtentMismatchRejected) {
  EXPECT_THROW(auroc(BinaryMask({2, 2}), ProbabilityMap({2, 3})), InputError);
}

TEST(Delta, SignAndAntisymmetry) {
  EXPECT_EQ(delta_m(0.9, 0.8).preference, Preference::first_better);
  EXPECT_EQ(delta_m(0.8, 0.9).preference, Preference::second_better);
  EXPECT_EQ(delta_m(0.7, 0.7).preference, Preference::tie);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    EXPECT_EQ(delta_m(a, b).value, -delta_m(b, a).value);
  }
  EXPECT_EQ(to_string(Preference::first_better), "TII_better");
  EXPECT_EQ(to_string(Preference::second_better), "LMI_better");
}

TEST(ThresholdCount, InclusiveAndMonotone) {
  const std::vector<double> v{0.5, 0.89, 0.9, 0.95, 1.0};
  EXPECT_EQ(threshold_count(v, 0.9), 3u);
  EXPECT_EQ(threshold_count(v, 0.0), 5u);
  EXPECT_EQ(threshold_count(v, 1.0), 1u);
  EXPECT_THROW(threshold_count(v, 1.5), InputError);
  EXPECT_EQ(threshold_count(std::vector<double>{}, 0.9), 0u);
  EXPECT_EQ(threshold_count(std::vector<double>{0.89, 0.90, 0.91}, 0.9), 2u);

  std::vector<MetricRecord> records{{"a", "T_II", MetricKind::auroc, {0.95, false}},
                                    {"b", "T_II", MetricKind::auroc, {std::nullopt, true}},
                                    {"c", "T_II", MetricKind::auroc, {0.9, false}}};
  EXPECT_EQ(threshold_count(records, 0.9), 2u);

  Rng rng(8);
  std::vector<double> r(200);
  for (auto& x : r) x = rng.uniform();
  std::size_t prev = r.size();
  for (int k = 0; k <= 20; ++k) {
    const auto c = threshold_count(r, k / 20.0);
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(MetricNames, RoundTrip) {
  for (auto k : kAllMetrics) EXPECT_EQ(parse_metric_kind(to_string(k)), k);
  EXPECT_THROW(parse_metric_kind("F1"), InputError);
}

}  // namespace
}  // namespace segstat
