#pragma once

// Per-image segmentation metrics and the signed model-comparison statistic.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segstat/error.hpp"
#include "segstat/image.hpp"
#include "segstat/mask_core.hpp"

namespace segstat {

enum class MetricKind { auroc, dice, sensitivity, specificity };

inline constexpr std::array<MetricKind, 4> kAllMetrics{MetricKind::auroc, MetricKind::dice,
                                                       MetricKind::sensitivity, MetricKind::specificity};

inline std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::auroc: return "AUROC";
    case MetricKind::dice: return "Dice";
    case MetricKind::sensitivity: return "Sensitivity";
    case MetricKind::specificity: return "Specificity";
  }
  return "?";
}

inline MetricKind parse_metric_kind(std::string_view name) {
  for (auto kind : kAllMetrics) {
    if (to_string(kind) == name) return kind;
  }
  throw InputError("unknown metric: " + std::string(name));
}

/// A metric value that may be missing; `degenerate` marks values produced by a
/// vacuous-case policy rather than the defining formula.
struct MetricValue {
  std::optional<double> value;
  bool degenerate = false;

  bool present() const { return value.has_value(); }
  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct MetricRecord {
  std::string image_id;
  std::string model;
  MetricKind kind = MetricKind::dice;
  MetricValue value;
};

inline MetricValue sensitivity(const ConfusionCounts& c) {
  const auto denom = c.tp + c.fn;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

inline MetricValue specificity(const ConfusionCounts& c) {
  const auto denom = c.tn + c.fp;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(c.tn) / static_cast<double>(denom), false};
}

inline MetricValue precision(const ConfusionCounts& c) {
  const auto denom = c.tp + c.fp;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

// 2TP / (2TP + FP + FN). Empty ground truth and empty prediction scores 1.
inline MetricValue dice(const ConfusionCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(2 * c.tp) / static_cast<double>(denom), false};
}

enum class DegenerateAurocPolicy { missing, accuracy_at_threshold };

struct AurocOptions {
  DegenerateAurocPolicy degenerate = DegenerateAurocPolicy::missing;
  double accuracy_threshold = 0.5;  // used by accuracy_at_threshold
};

/// Rank-statistic (Mann-Whitney) AUROC with midranks for tied scores. Equal to the
/// trapezoidal area under the ROC curve swept over every distinct score.
///
/// When the ground truth holds a single class the ROC curve is undefined; the
/// policy either leaves the value missing or substitutes pixel accuracy of
/// `prob >= accuracy_threshold`. Both cases set the degenerate flag.
inline MetricValue auroc(const BinaryMask& gt, const ProbabilityMap& prob, const AurocOptions& options = {}) {
  require_same_extent(gt, prob, "auroc");
  const std::size_t n = gt.size();
  std::uint64_t positives = 0;
  for (auto v : gt) positives += v != 0;
  const std::uint64_t negatives = n - positives;

  if (positives == 0 || negatives == 0) {
    if (options.degenerate == DegenerateAurocPolicy::missing) return {std::nullopt, true};
    std::uint64_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += ((prob[i] >= options.accuracy_threshold) == (gt[i] != 0));
    return {static_cast<double>(correct) / static_cast<double>(n), true};
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return prob[a] < prob[b]; });

  // Ranks are 1-based; a tie group spanning ranks [lo, hi] shares rank (lo+hi)/2.
  // Work with doubled ranks so every quantity stays an exact integer.
  std::uint64_t doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::uint64_t group_positives = 0;
    while (j < n && prob[order[j]] == prob[order[i]]) {
      group_positives += gt[order[j]] != 0;
      ++j;
    }
    const std::uint64_t doubled_midrank = (i + 1) + j;
    doubled_rank_sum += group_positives * doubled_midrank;
    i = j;
  }
  const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return {static_cast<double>(doubled_u) / static_cast<double>(2 * positives * negatives), false};
}

enum class Preference { first_better, tie, second_better };

inline std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::first_better: return "TII_better";
    case Preference::tie: return "tie";
    case Preference::second_better: return "LMI_better";
  }
  return "?";
}

struct Delta {
  double value = 0.0;
  Preference preference = Preference::tie;
};

/// Signed difference first - second (transfer-learned minus native), classified by sign.
inline Delta delta_m(double first, double second) {
  const double d = first - second;
  return {d, d > 0 ? Preference::first_better : (d < 0 ? Preference::second_better : Preference::tie)};
}

/// Number of present values >= threshold (inclusive).
inline std::size_t threshold_count(std::span<const MetricRecord> records, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0,1]");
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const MetricRecord& r) {
    return r.value.present() && *r.value.value >= threshold;
  }));
}

inline std::size_t threshold_count(std::span<const double> values, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, "threshold must lie in [0,1]");
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v >= threshold; }));
}

/// All four metrics for one (image, model) pair.
struct ImageMetrics {
  ConfusionCounts counts;
  MetricValue auroc;
  MetricValue dice;
  MetricValue sensitivity;
  MetricValue specificity;

  const MetricValue& get(MetricKind kind) const {
    switch (kind) {
      case MetricKind::auroc: return auroc;
      case MetricKind::dice: return dice;
      case MetricKind::sensitivity: return sensitivity;
      case MetricKind::specificity: return specificity;
    }
    return dice;
  }
};

inline ImageMetrics evaluate_image(const BinaryMask& gt, const BinaryMask& pred, const ProbabilityMap& prob,
                                   const AurocOptions& options = {}) {
  ImageMetrics m;
  m.counts = confusion(gt, pred);
  m.auroc = auroc(gt, prob, options);
  m.dice = dice(m.counts);
  m.sensitivity = sensitivity(m.counts);
  m.specificity = specificity(m.counts);
  return m;
}

}  // namespace segstat
