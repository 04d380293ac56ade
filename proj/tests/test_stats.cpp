#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "segstat/stats.hpp"
#include "test_support.hpp"

namespace segstat::stats {
namespace {

using testing::parse_doubles;
using testing::read_reference;

TEST(Summary, KnownValues) {
  const std::vector<double> v{0.2, 0.9, 0.4, 0.7};
  const auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 0.55);
  EXPECT_DOUBLE_EQ(s.median, 0.55);
  EXPECT_NEAR(s.sd, std::sqrt(0.29 / 3.0), 1e-15);
  EXPECT_EQ(s.n, 4u);

  const std::vector<double> odd{3.0, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(median(odd), 2.0);
  const std::vector<double> one{0.8};
  EXPECT_DOUBLE_EQ(summarize(one).sd, 0.0);
  EXPECT_THROW(summarize(std::vector<double>{}), InputError);
}

TEST(Summary, SmallLists) {
  const auto s = summarize(std::vector<double>{1, 2, 3});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_DOUBLE_EQ(s.sd, 1.0);
  EXPECT_DOUBLE_EQ(median(std::vector<double>{1, 2, 3, 4}), 2.5);
}

TEST(Summary, MedianStableUnderDuplicatedMedian) {
  Rng rng(41);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(2 * rng.below(20) + 1);
    for (auto& x : v) x = rng.uniform();
    const double m = median(v);
    v.push_back(m);
    EXPECT_EQ(median(v), m);
  }
}

TEST(ShapiroWilk, MatchesReference) {
  for (const auto& row : read_reference(testing::data_dir() / "shapiro_wilk_reference.csv")) {
    SCOPED_TRACE(row.at("name"));
    const auto values = parse_doubles(row.at("values"));
    const auto r = shapiro_wilk(values);
    EXPECT_NEAR(r.w, std::stod(row.at("w")), 1e-4);
    EXPECT_NEAR(r.p_value, std::stod(row.at("p_value")), 1e-4);
    EXPECT_EQ(r.n_used, values.size());
    EXPECT_FALSE(r.subsampled);
  }
}

TEST(ShapiroWilk, RoystonExampleTight) {
  const auto rows = read_reference(testing::data_dir() / "shapiro_wilk_reference.csv");
  const auto values = parse_doubles(rows.front().at("values"));
  const auto r = shapiro_wilk(values);
  EXPECT_NEAR(r.w, 0.83467, 5e-5);
  EXPECT_NEAR(r.p_value, 0.000914, 5e-6);
}

TEST(ShapiroWilk, AffineInvariance) {
  Rng rng(17);
  std::vector<double> x(80);
  for (auto& v : x) v = std::exp(rng.normal());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.5 * x[i] - 12.0;
  EXPECT_NEAR(shapiro_wilk(x).w, shapiro_wilk(y).w, 1e-12);
}

TEST(ShapiroWilk, CalibratedUnderNormality) {
  Rng rng(2024);
  int rejections = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(60);
    for (auto& v : x) v = rng.normal();
    rejections += shapiro_wilk(x).p_value < 0.05;
  }
  EXPECT_GE(rejections, 8);
  EXPECT_LE(rejections, 32);
}

TEST(ShapiroWilk, NormalSamplesMostlyAccepted) {
  Rng rng(100);
  int accepted = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(100);
    for (auto& v : x) v = rng.normal();
    accepted += shapiro_wilk(x).p_value > 0.05;
  }
  EXPECT_GE(accepted, 95);
}

TEST(ShapiroWilk, ConstantInputRejected) {
  EXPECT_THROW(shapiro_wilk(std::vector<double>(10, 0.7)), InputError);
}

TEST(ShapiroWilk, RejectsSkewedData) {
  Rng rng(5);
  std::vector<double> x(100);
  for (auto& v : x) v = std::pow(rng.uniform(), 4.0);
  EXPECT_LT(shapiro_wilk(x).p_value, 1e-4);
}

TEST(ShapiroWilk, SubsamplesLargeInputsDeterministically) {
  Rng rng(9);
  std::vector<double> x(6000);
  for (auto& v : x) v = rng.normal();
  const auto a = shapiro_wilk(x, 3);
  const auto b = shapiro_wilk(x, 3);
  EXPECT_TRUE(a.subsampled);
  EXPECT_EQ(a.n_used, kShapiroWilkMaxN);
  EXPECT_EQ(a.w, b.w);
  EXPECT_THROW(shapiro_wilk(std::vector<double>{1.0, 2.0}), InputError);
}

TEST(YeoJohnson, TransformExamples) {
  EXPECT_DOUBLE_EQ(yeo_johnson(3.0, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(yeo_johnson(-3.0, 1.0), -3.0);
  EXPECT_DOUBLE_EQ(yeo_johnson(std::exp(1.0) - 1.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(yeo_johnson(1.0 - std::exp(1.0), 2.0), -1.0);
  EXPECT_DOUBLE_EQ(yeo_johnson(3.0, 0.5), 2.0);  // (sqrt(4) - 1) / 0.5
  EXPECT_DOUBLE_EQ(yeo_johnson(0.0, -1.7), 0.0);
}

TEST(YeoJohnson, InverseRoundTrip) {
  Rng rng(12);
  for (double lambda : {-1.0, 0.0, 0.5, 1.0, 2.0, 3.3}) {
    for (int i = 0; i < 200; ++i) {
      const double y = 6.0 * (rng.uniform() - 0.5);
      EXPECT_NEAR(inverse_yeo_johnson(yeo_johnson(y, lambda), lambda), y, 1e-9 * (1 + std::abs(y)));
    }
  }
  EXPECT_TRUE(std::isnan(inverse_yeo_johnson(2.0, -1.0)));
}

TEST(YeoJohnson, MonotoneInInput) {
  for (double lambda : {-2.0, 0.0, 0.7, 2.0, 4.0}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = -50; i <= 50; ++i) {
      const double z = yeo_johnson(i / 10.0, lambda);
      EXPECT_GT(z, prev);
      prev = z;
    }
  }
}

TEST(YeoJohnson, MatchesReferenceLikelihoodAndFit) {
  const double lambdas[] = {-1.0, 0.0, 0.5, 1.0, 2.0};
  const char* columns[] = {"llf_-1", "llf_0", "llf_0.5", "llf_1", "llf_2"};
  for (const auto& row : read_reference(testing::data_dir() / "yeo_johnson_reference.csv")) {
    SCOPED_TRACE(row.at("name"));
    const auto x = parse_doubles(row.at("values"));
    for (int k = 0; k < 5; ++k) {
      EXPECT_NEAR(yeo_johnson_log_likelihood(x, lambdas[k]), std::stod(row.at(columns[k])), 1e-8);
    }
    const double expected = std::stod(row.at("lambda_mle"));
    const auto fit = yeo_johnson_mle(x);
    if (std::abs(expected) < 5.0) {
      EXPECT_NEAR(fit.lambda, expected, 1e-4);
    } else {
      EXPECT_NEAR(fit.lambda, std::copysign(5.0, expected), 1e-5);  // pinned at the search bound
    }
  }
}

TEST(YeoJohnson, RecoversPlantedLambda) {
  struct Case { double lambda, mu, sigma; };
  for (const auto& c : {Case{-1.0, 0.0, 0.25}, Case{0.0, 0.0, 1.0}, Case{0.5, 0.0, 1.0}, Case{1.0, 0.0, 1.0},
                        Case{2.0, 0.0, 1.0}}) {
    const auto x = testing::planted_yeo_johnson(c.lambda, c.mu, c.sigma, 2000);
    EXPECT_NEAR(yeo_johnson_mle(x).lambda, c.lambda, 0.05) << c.lambda;
  }
}

TEST(YeoJohnson, RecoversLambdaFromRandomDraws) {
  // Wide spread keeps the estimate tight; the bounded-range case is covered above.
  Rng rng(31);
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    std::vector<double> x(2000);
    for (auto& v : x) v = inverse_yeo_johnson(3.0 * rng.normal(), lambda);
    EXPECT_NEAR(yeo_johnson_mle(x).lambda, lambda, 0.05) << lambda;
  }
}

TEST(YeoJohnson, GaussianDataFitsNearIdentity) {
  Rng rng(64);
  std::vector<double> x(2000);
  for (auto& v : x) v = rng.normal();
  EXPECT_NEAR(yeo_johnson_mle(x).lambda, 1.0, 0.1);
}

TEST(YeoJohnson, MirroredDataSymmetricLikelihood) {
  Rng rng(65);
  std::vector<double> x(200), mirrored(200);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::exp(rng.normal()) - 0.8;
    mirrored[i] = -x[i];
  }
  for (double lambda : {-1.0, 0.0, 0.3, 1.0, 1.7, 2.0, 3.5}) {
    EXPECT_NEAR(yeo_johnson_log_likelihood(x, lambda), yeo_johnson_log_likelihood(mirrored, 2.0 - lambda), 1e-8);
    EXPECT_NEAR(yeo_johnson(-x[0], 2.0 - lambda), -yeo_johnson(x[0], lambda), 1e-12);
  }
}

TEST(YeoJohnson, MedianCommutes) {
  Rng rng(66);
  std::vector<double> x(101);
  for (auto& v : x) v = 4.0 * rng.normal();
  for (double lambda : {-1.5, 0.0, 0.5, 2.0, 3.0}) {
    EXPECT_DOUBLE_EQ(median(yeo_johnson(x, lambda)), yeo_johnson(median(x), lambda));
  }
}

TEST(YeoJohnson, FitRejectsDegenerateInput) {
  EXPECT_THROW(yeo_johnson_mle(std::vector<double>{0.5, 0.5, 0.5}), InputError);
  EXPECT_THROW(yeo_johnson_mle(std::vector<double>{0.5, 0.6}), InputError);
}

TEST(Mood, MatchesReference) {
  const auto rows = read_reference(testing::data_dir() / "mood_reference.csv");
  ASSERT_EQ(rows.size(), 21u);
  for (const auto& row : rows) {
    SCOPED_TRACE(row.at("name"));
    const auto a = parse_doubles(row.at("a"));
    const auto b = parse_doubles(row.at("b"));
    const auto plain = moods_median_test(a, b);
    EXPECT_DOUBLE_EQ(plain.grand_median, std::stod(row.at("grand_median")));
    EXPECT_NEAR(plain.statistic, std::stod(row.at("statistic")), 1e-9);
    EXPECT_NEAR(plain.p_value, std::stod(row.at("p_value")), 1e-6);
    const auto yates = moods_median_test(a, b, {MedianTies::below, true});
    EXPECT_NEAR(yates.statistic, std::stod(row.at("statistic_yates")), 1e-9);
    EXPECT_NEAR(yates.p_value, std::stod(row.at("p_value_yates")), 1e-6);
  }
}

TEST(Mood, ContingencyAndSymmetry) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> b{11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  const auto r = moods_median_test(a, b);
  EXPECT_DOUBLE_EQ(r.grand_median, 10.5);
  EXPECT_EQ(r.contingency[0][0], 0u);
  EXPECT_EQ(r.contingency[0][1], 10u);
  EXPECT_EQ(r.contingency[1][0], 10u);
  EXPECT_DOUBLE_EQ(r.statistic, 20.0);
  EXPECT_TRUE(r.significant);
  EXPECT_DOUBLE_EQ(moods_median_test(b, a).p_value, r.p_value);
}

TEST(Mood, InvariantUnderMonotoneMaps) {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(30), b(45);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = rng.uniform() * 0.9;
    std::vector<double> fa(a), fb(b);
    for (auto& v : fa) v = std::exp(3 * v);
    for (auto& v : fb) v = std::exp(3 * v);
    EXPECT_DOUBLE_EQ(moods_median_test(a, b).p_value, moods_median_test(fa, fb).p_value);
  }
}

TEST(Mood, IdenticalSamples) {
  const std::vector<double> a{0.3, 0.9, 0.5, 0.7, 0.1, 0.2};
  const auto r = moods_median_test(a, a);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
  EXPECT_EQ(r.contingency[0][0] + r.contingency[0][1], a.size());
}

TEST(Mood, TiesAndEdgeCases) {
  // Everything equal to the median except one larger value: all ties go below.
  const std::vector<double> a{1, 1, 1}, b{1, 1, 2};
  const auto below = moods_median_test(a, b);
  EXPECT_EQ(below.contingency[0][0] + below.contingency[1][0], 1u);
  const auto above = moods_median_test(a, b, {MedianTies::above});
  EXPECT_EQ(above.contingency[0][0] + above.contingency[1][0], 6u);
  EXPECT_DOUBLE_EQ(above.statistic, 0.0);
  EXPECT_DOUBLE_EQ(above.p_value, 1.0);

  EXPECT_THROW(moods_median_test(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5}), InputError);
  EXPECT_THROW(moods_median_test(std::vector<double>{}, std::vector<double>{0.5}), InputError);
}

MetricDistribution distribution(const std::string& model, const std::vector<std::optional<double>>& values) {
  MetricDistribution d{model, MetricKind::dice, {}};
  for (std::size_t i = 0; i < values.size(); ++i) {
    d.values[fmt::format("img{:02d}", i)] = MetricValue{values[i], !values[i].has_value()};
  }
  return d;
}

TEST(CompareModels, TenImageHandCase) {
  const auto a = distribution("T_II", {0.95, 0.91, 0.90, 0.88, 0.97, 0.60, 0.93, 0.85, std::nullopt, 0.92});
  const auto b = distribution("L_MI", {0.90, 0.91, 0.94, 0.70, 0.89, 0.65, 0.80, 0.90, 0.75, 0.99});
  const auto c = compare_models(a, b);
  EXPECT_EQ(c.n_gt, 4u);  // 0, 3, 4, 6
  EXPECT_EQ(c.n_eq, 1u);  // 1
  EXPECT_EQ(c.n_lt, 4u);  // 2, 5, 7, 9
  EXPECT_EQ(c.n_skipped, 1u);
  EXPECT_EQ(c.n_a_at_threshold, 6u);  // 0.95 0.91 0.90 0.97 0.93 0.92
  EXPECT_EQ(c.n_b_at_threshold, 5u);  // 0.90 0.91 0.94 0.90 0.99
  EXPECT_DOUBLE_EQ(c.summary_a.median, 0.91);
  EXPECT_DOUBLE_EQ(c.summary_b.median, 0.895);
  EXPECT_EQ(c.summary_a.n, 9u);
  EXPECT_NEAR(c.median_delta.value, 0.015, 1e-12);
  EXPECT_EQ(c.median_delta.preference, Preference::first_better);
  EXPECT_FALSE(c.median_dagger.has_value());
  ASSERT_TRUE(c.mood.has_value());
}

TEST(CompareModels, IdenticalDistributions) {
  const auto a = distribution("T_II", {0.95, 0.81, 0.9, 0.77, 0.6});
  auto b = a;
  b.model = "L_MI";
  const auto c = compare_models(a, b);
  EXPECT_EQ(c.n_eq, 5u);
  EXPECT_EQ(c.n_gt + c.n_lt, 0u);
  EXPECT_FALSE(c.significant);
  EXPECT_FALSE(c.median_dagger.has_value());
  EXPECT_EQ(c.median_delta.preference, Preference::tie);
}

TEST(CompareModels, SkipDegeneratePairs) {
  auto a = distribution("T_II", {0.9, 0.8, 0.7});
  auto b = distribution("L_MI", {0.5, 0.8, 0.9});
  a.values["img00"].degenerate = true;
  CompareOptions opts;
  EXPECT_EQ(compare_models(a, b, opts).n_gt, 1u);
  opts.skip_degenerate_pairs = true;
  const auto c = compare_models(a, b, opts);
  EXPECT_EQ(c.n_gt, 0u);
  EXPECT_EQ(c.n_skipped, 1u);
}

TEST(CompareModels, Errors) {
  const auto a = distribution("T_II", {0.9, 0.8});
  const auto b = distribution("L_MI", {0.9, 0.8, 0.7});
  EXPECT_THROW(compare_models(a, b), InputError);
  auto c = distribution("L_MI", {0.9, 0.8});
  c.kind = MetricKind::auroc;
  EXPECT_THROW(compare_models(a, c), InputError);
  const auto constant = compare_models(distribution("T_II", {1.0, 1.0}), distribution("L_MI", {1.0, 1.0}));
  EXPECT_FALSE(constant.mood.has_value());
  EXPECT_FALSE(constant.significant);
}

TEST(Dagger, AbsoluteStrictRule) {
  EXPECT_EQ(dagger(delta_m(0.9, 0.8), 0.05), Preference::first_better);
  EXPECT_FALSE(dagger(delta_m(0.85, 0.80), 0.05 + 1e-12).has_value());
  EXPECT_FALSE(dagger(Delta{-0.0461, Preference::second_better}, 0.05).has_value());
  EXPECT_EQ(dagger(Delta{-0.0738, Preference::second_better}, 0.05), Preference::second_better);
}

}  // namespace
}  // namespace segstat::stats
