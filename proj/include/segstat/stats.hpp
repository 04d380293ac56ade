#pragma once

// Distribution summaries, normality testing, power transforms and the
// nonparametric median test used to compare two models' per-image metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "segstat/error.hpp"
#include "segstat/metrics.hpp"
#include "segstat/random.hpp"

namespace segstat::stats {

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;  // sample (n-1) convention; 0 for a single value
  std::size_t n = 0;
};

/// Median with the midpoint rule for even n.
inline double median(std::span<const double> values) {
  require(!values.empty(), "median of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

inline Summary summarize(std::span<const double> values) {
  require(!values.empty(), "summarize: empty list");
  Summary s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  s.median = median(values);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk W test, Royston's AS R94 approximation.

inline constexpr std::size_t kShapiroWilkMaxN = 5000;

struct ShapiroWilkResult {
  double w = 1.0;
  double p_value = 1.0;
  std::size_t n_used = 0;
  bool subsampled = false;  // true when the input exceeded kShapiroWilkMaxN
};

namespace detail {

inline double poly(std::span<const double> coefficients, double x) {
  double result = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) result = result * x + *it;
  return result;
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double normal_upper_tail(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>{}, z));
}

// Half of the antisymmetric coefficient vector: a[i] weights x_(n-i) - x_(i+1).
inline std::vector<double> shapiro_wilk_coefficients(std::size_t n) {
  static constexpr std::array<double, 6> c1{0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr std::array<double, 6> c2{0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  const double an = static_cast<double>(n);
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(c1, rsn) - m[0] / ssumm2;

  std::size_t first_scaled = 1;
  double fac = 0.0;
  if (n > 5) {
    first_scaled = 2;
    const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
  }
  a[0] = a1;
  for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

// Expects sorted input with 3 <= n <= 5000.
inline ShapiroWilkResult shapiro_wilk_sorted(std::span<const double> x) {
  static constexpr std::array<double, 4> c3{0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr std::array<double, 4> c4{1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr std::array<double, 4> c5{-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr std::array<double, 3> c6{-0.4803, -0.082676, 0.0030302};
  static constexpr std::array<double, 2> g{-2.273, 0.459};

  const std::size_t n = x.size();
  const double range = x[n - 1] - x[0];
  require(range > 1e-19 * std::max(1.0, std::abs(x[0])), "shapiro_wilk: constant input");

  const auto half_a = shapiro_wilk_coefficients(n);
  // Full coefficient for position i (0-based): -a[i] in the lower half,
  // +a[n-1-i] in the upper half, 0 at the centre of odd n.
  auto coefficient = [&](std::size_t i) {
    if (i < n / 2) return -half_a[i];
    if (n - 1 - i < n / 2) return half_a[n - 1 - i];
    return 0.0;
  };

  // Squared correlation between the range-scaled data and the coefficients;
  // w1 = 1 - W is formed directly to keep precision when W is close to 1.
  double sa = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += coefficient(i);
    sx += x[i] / range;
  }
  sa /= static_cast<double>(n);
  sx /= static_cast<double>(n);
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coefficient(i) - sa;
    const double xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);

  ShapiroWilkResult r;
  r.n_used = n;
  r.w = 1.0 - w1;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;  // 6 / pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(r.w)) - stqr), 0.0, 1.0);
    return r;
  }

  const double an = static_cast<double>(n);
  double y = std::log(w1);
  double m = 0.0, s = 1.0;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    m = poly(c3, an);
    s = std::exp(poly(c4, an));
  } else {
    const double ln_n = std::log(an);
    m = poly(c5, ln_n);
    s = std::exp(poly(c6, ln_n));
  }
  r.p_value = std::clamp(normal_upper_tail((y - m) / s), 0.0, 1.0);
  return r;
}

}  // namespace detail

/// Shapiro-Wilk normality test. Inputs larger than 5000 values are reduced to a
/// uniformly drawn subsample of 5000 under `seed`; the result records this.
inline ShapiroWilkResult shapiro_wilk(std::span<const double> values, std::uint64_t seed = 0) {
  require(values.size() >= 3, "shapiro_wilk: need at least 3 values");
  std::vector<double> x(values.begin(), values.end());
  bool subsampled = false;
  if (x.size() > kShapiroWilkMaxN) {
    Rng rng(seed);
    shuffle(x, rng);
    x.resize(kShapiroWilkMaxN);
    subsampled = true;
  }
  std::sort(x.begin(), x.end());
  auto result = detail::shapiro_wilk_sorted(x);
  result.subsampled = subsampled;
  return result;
}

// ---------------------------------------------------------------------------
// Yeo-Johnson power transform.

inline double yeo_johnson(double y, double lambda) {
  if (y >= 0.0) {
    return lambda == 0.0 ? std::log1p(y) : (std::pow(y + 1.0, lambda) - 1.0) / lambda;
  }
  return lambda == 2.0 ? -std::log1p(-y) : -(std::pow(1.0 - y, 2.0 - lambda) - 1.0) / (2.0 - lambda);
}

inline std::vector<double> yeo_johnson(std::span<const double> values, double lambda) {
  require(std::isfinite(lambda), "yeo_johnson: lambda must be finite");
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [&](double y) { return yeo_johnson(y, lambda); });
  return out;
}

/// Inverse transform; returns NaN when `z` lies outside the transform's range for `lambda`.
inline double inverse_yeo_johnson(double z, double lambda) {
  if (z >= 0.0) {
    if (lambda == 0.0) return std::expm1(z);
    const double base = 1.0 + lambda * z;
    return base > 0.0 ? std::pow(base, 1.0 / lambda) - 1.0 : std::nan("");
  }
  if (lambda == 2.0) return -std::expm1(-z);
  const double base = 1.0 - (2.0 - lambda) * z;
  return base > 0.0 ? 1.0 - std::pow(base, 1.0 / (2.0 - lambda)) : std::nan("");
}

/// Profile Gaussian log-likelihood of the transformed data (variance at its MLE),
/// including the Jacobian term (lambda - 1) * sum(sign(y) * log(|y| + 1)).
inline double yeo_johnson_log_likelihood(std::span<const double> values, double lambda) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0, jacobian = 0.0;
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    z[i] = yeo_johnson(values[i], lambda);
    mean += z[i];
    jacobian += std::copysign(std::log1p(std::abs(values[i])), values[i]);
  }
  mean /= n;
  double ss = 0.0;
  for (double v : z) ss += (v - mean) * (v - mean);
  const double variance = ss / n;
  if (!(variance > 0.0) || !std::isfinite(variance)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(variance) + (lambda - 1.0) * jacobian;
}

struct YeoJohnsonFit {
  double lambda = 1.0;
  double log_likelihood = 0.0;
};

/// Golden-section search for the likelihood-maximizing lambda on [lo, hi].
inline YeoJohnsonFit yeo_johnson_mle(std::span<const double> values, double lo = -5.0, double hi = 5.0,
                                     double tolerance = 1e-6) {
  require(values.size() >= 3, "yeo_johnson_mle: need at least 3 values");
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  require(*max_it > *min_it, "yeo_johnson_mle: constant input");

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = yeo_johnson_log_likelihood(values, c);
  double fd = yeo_johnson_log_likelihood(values, d);
  while (b - a > tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = yeo_johnson_log_likelihood(values, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = yeo_johnson_log_likelihood(values, d);
    }
  }
  const double lambda = 0.5 * (a + b);
  return {lambda, yeo_johnson_log_likelihood(values, lambda)};
}

// ---------------------------------------------------------------------------
// Mood's median test.

// Where values equal to the grand median are tallied.
enum class MedianTies { below, above };

struct MoodOptions {
  MedianTies ties = MedianTies::below;
  bool continuity_correction = false;
  double alpha = 0.05;
};

struct MoodResult {
  double grand_median = 0.0;
  // contingency[g][0]: values of group g above the grand median; [g][1]: the rest.
  std::array<std::array<std::uint64_t, 2>, 2> contingency{};
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

/// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi_square_1df_upper(double statistic) { return std::erfc(std::sqrt(statistic / 2.0)); }

/// Mood's median test on two samples: pooled grand median, 2x2 table of
/// above / not-above counts, Pearson chi-square with one degree of freedom.
/// A table with an empty column carries no evidence and yields statistic 0, p 1.
inline MoodResult moods_median_test(std::span<const double> a, std::span<const double> b,
                                    const MoodOptions& options = {}) {
  require(!a.empty() && !b.empty(), "moods_median_test: both samples must be non-empty");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto [min_it, max_it] = std::minmax_element(pooled.begin(), pooled.end());
  require(*max_it > *min_it, "moods_median_test: pooled data is constant");

  MoodResult r;
  r.grand_median = median(pooled);
  auto tally = [&](std::span<const double> sample, std::size_t row) {
    for (double v : sample) {
      const bool above = options.ties == MedianTies::below ? v > r.grand_median : v >= r.grand_median;
      ++r.contingency[row][above ? 0 : 1];
    }
  };
  tally(a, 0);
  tally(b, 1);

  const double total = static_cast<double>(pooled.size());
  std::array<double, 2> rows{}, cols{};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      rows[i] += static_cast<double>(r.contingency[i][j]);
      cols[j] += static_cast<double>(r.contingency[i][j]);
    }
  }
  if (cols[0] == 0.0 || cols[1] == 0.0) return r;

  double statistic = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / total;
      double diff = std::abs(static_cast<double>(r.contingency[i][j]) - expected);
      if (options.continuity_correction) diff -= std::min(0.5, diff);
      statistic += diff * diff / expected;
    }
  }
  r.statistic = statistic;
  r.p_value = std::clamp(chi_square_1df_upper(statistic), 0.0, 1.0);
  r.significant = r.p_value < options.alpha;
  return r;
}

// ---------------------------------------------------------------------------
// Model comparison over one metric.

/// Per-image values of one metric for one model. Missing values stay in
/// `values` as empty optionals so images line up across models.
struct MetricDistribution {
  std::string model;
  MetricKind kind = MetricKind::dice;
  std::map<std::string, MetricValue> values;  // keyed and ordered by image id

  std::vector<double> present() const {
    std::vector<double> out;
    for (const auto& [id, v] : values) {
      if (v.present()) out.push_back(*v.value);
    }
    return out;
  }
  std::size_t missing() const { return values.size() - present().size(); }
  Summary summary() const { return summarize(present()); }
};

struct CompareOptions {
  MoodOptions mood;
  double superiority = 0.05;  // |delta| strictly above this earns a dagger
  double count_threshold = 0.9;
  bool skip_degenerate_pairs = false;
};

struct ModelComparison {
  MetricKind kind = MetricKind::dice;
  Summary summary_a, summary_b;
  Delta median_delta, mean_delta;
  std::optional<MoodResult> mood;  // empty when the test is undefined (pooled-constant data)
  bool significant = false;
  std::optional<Preference> median_dagger, mean_dagger;
  std::size_t n_gt = 0, n_eq = 0, n_lt = 0, n_skipped = 0;
  std::size_t n_a_at_threshold = 0, n_b_at_threshold = 0;
};

inline std::optional<Preference> dagger(const Delta& d, double superiority) {
  if (std::abs(d.value) > superiority) return d.preference;
  return std::nullopt;
}

/// Compares model a against model b (delta = a - b) over the same image set.
inline ModelComparison compare_models(const MetricDistribution& a, const MetricDistribution& b,
                                      const CompareOptions& options = {}) {
  require(a.kind == b.kind, "compare_models: distributions measure different metrics");
  require(a.values.size() == b.values.size(), "compare_models: image sets differ");
  for (const auto& [id, v] : a.values) {
    require(b.values.contains(id), "compare_models: image " + id + " missing for model " + b.model);
  }

  ModelComparison c;
  c.kind = a.kind;
  const auto va = a.present();
  const auto vb = b.present();
  require(!va.empty() && !vb.empty(), "compare_models: no present values for " + std::string(to_string(a.kind)));
  c.summary_a = summarize(va);
  c.summary_b = summarize(vb);
  c.median_delta = delta_m(c.summary_a.median, c.summary_b.median);
  c.mean_delta = delta_m(c.summary_a.mean, c.summary_b.mean);
  c.median_dagger = dagger(c.median_delta, options.superiority);
  c.mean_dagger = dagger(c.mean_delta, options.superiority);

  try {
    c.mood = moods_median_test(va, vb, options.mood);
    c.significant = c.mood->significant;
  } catch (const InputError&) {
    c.mood.reset();
  }

  for (const auto& [id, value_a] : a.values) {
    const auto& value_b = b.values.at(id);
    if (!value_a.present() || !value_b.present() ||
        (options.skip_degenerate_pairs && (value_a.degenerate || value_b.degenerate))) {
      ++c.n_skipped;
      continue;
    }
    switch (delta_m(*value_a.value, *value_b.value).preference) {
      case Preference::first_better: ++c.n_gt; break;
      case Preference::tie: ++c.n_eq; break;
      case Preference::second_better: ++c.n_lt; break;
    }
  }
  c.n_a_at_threshold = threshold_count(va, options.count_threshold);
  c.n_b_at_threshold = threshold_count(vb, options.count_threshold);
  return c;
}

}  // namespace segstat::stats
