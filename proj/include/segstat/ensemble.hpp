#pragma once

// Replicate aggregation (pixel-wise intersection of run masks, mean of run
// heatmaps) and two-model fusion by union or intersection.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segstat/error.hpp"
#include "segstat/image.hpp"
#include "segstat/mask_core.hpp"
#include "segstat/metrics.hpp"

namespace segstat {

inline constexpr std::size_t kDefaultRunCount = 5;

/// One model's replicate outputs for one image.
struct RunSet {
  std::string image_id;
  std::string model;
  std::vector<BinaryMask> run_outputs;
  // Per target class (index 0 and 1); empty when no heatmaps were exported.
  std::array<std::vector<Heatmap>, 2> run_heatmaps;

  void validate(std::size_t expected_runs = kDefaultRunCount) const {
    require(run_outputs.size() == expected_runs,
            image_id + "/" + model + ": expected " + std::to_string(expected_runs) + " runs, got " +
                std::to_string(run_outputs.size()));
    for (const auto& m : run_outputs) require_same_extent(run_outputs.front(), m, "run set");
    for (const auto& maps : run_heatmaps) {
      for (const auto& h : maps) require_same_extent(run_outputs.front(), h.values, "run set heatmap");
    }
  }
};

/// Final model output: a pixel is 1 only when every run marks it.
inline BinaryMask run_intersection(std::span<const BinaryMask> runs) {
  require(!runs.empty(), "run_intersection: no runs");
  BinaryMask out = runs.front();
  for (const auto& run : runs.subspan(1)) {
    require_same_extent(out, run, "run_intersection");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] && run[i]) ? 1 : 0;
  }
  return out;
}

inline BinaryMask run_intersection(const RunSet& rs) { return run_intersection(rs.run_outputs); }

/// Strict-majority vote across runs. Not the replicate rule used for reporting;
/// provided for sensitivity analyses.
inline BinaryMask run_majority(std::span<const BinaryMask> runs) {
  require(!runs.empty(), "run_majority: no runs");
  BinaryMask out(runs.front().extent());
  for (const auto& run : runs) require_same_extent(out, run, "run_majority");
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t votes = 0;
    for (const auto& run : runs) votes += run[i] != 0;
    out[i] = 2 * votes > runs.size() ? 1 : 0;
  }
  return out;
}

/// Pixel-wise minimum of run probability maps. Thresholding the result at t gives
/// the intersection of the runs thresholded at t, for every t.
inline ProbabilityMap run_minimum(std::span<const ProbabilityMap> runs) {
  require(!runs.empty(), "run_minimum: no runs");
  ProbabilityMap out = runs.front();
  for (const auto& run : runs.subspan(1)) {
    require_same_extent(out, run, "run_minimum");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], run[i]);
  }
  return out;
}

/// Per-pixel arithmetic mean of run heatmaps, accumulated in double.
inline Heatmap gradcam_average(std::span<const Heatmap> maps) {
  require(!maps.empty(), "gradcam_average: missing heatmaps");
  const int target = maps.front().target_class;
  Raster<double> sum(maps.front().values.extent(), 0.0);
  for (const auto& h : maps) {
    require(h.target_class == target, "gradcam_average: heatmaps target different classes");
    require_same_extent(sum, h.values, "gradcam_average");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += h.values[i];
  }
  const double n = static_cast<double>(maps.size());
  for (auto& v : sum) v /= n;
  return Heatmap{std::move(sum), target};
}

inline Heatmap gradcam_average(const RunSet& rs, int target_class, std::size_t expected_runs = kDefaultRunCount) {
  require(target_class == 0 || target_class == 1, "gradcam_average: target class must be 0 or 1");
  const auto& maps = rs.run_heatmaps[static_cast<std::size_t>(target_class)];
  require(maps.size() == expected_runs, rs.image_id + "/" + rs.model + ": expected " + std::to_string(expected_runs) +
                                            " heatmaps for class " + std::to_string(target_class) + ", got " +
                                            std::to_string(maps.size()));
  return gradcam_average(maps);
}

enum class FusionOp { union_, intersection };

inline std::string_view to_string(FusionOp op) { return op == FusionOp::union_ ? "union" : "intersection"; }

inline BinaryMask fuse(const BinaryMask& a, const BinaryMask& b, FusionOp op) {
  require_same_extent(a, b, "fuse");
  BinaryMask out(a.extent());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    out[i] = (op == FusionOp::union_ ? (x || y) : (x && y)) ? 1 : 0;
  }
  return out;
}

enum class Recommendation { none, union_, intersection };

inline std::string_view to_string(Recommendation r) {
  switch (r) {
    case Recommendation::none: return "none";
    case Recommendation::union_: return "union";
    case Recommendation::intersection: return "intersection";
  }
  return "?";
}

// Rates with an empty denominator count as 0.
inline double false_positive_rate(const ConfusionCounts& c) {
  const auto d = c.fp + c.tn;
  return d == 0 ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(d);
}

inline double false_negative_rate(const ConfusionCounts& c) {
  const auto d = c.fn + c.tp;
  return d == 0 ? 0.0 : static_cast<double>(c.fn) / static_cast<double>(d);
}

struct FusionThresholds {
  double fpr_high = 0.1;
  double fnr_high = 0.1;
};

/// Intersection when both models over-segment, union when both under-segment.
inline Recommendation recommend_fusion(const ConfusionCounts& a, const ConfusionCounts& b,
                                       const FusionThresholds& t = {}) {
  require(t.fpr_high > 0.0 && t.fpr_high < 1.0 && t.fnr_high > 0.0 && t.fnr_high < 1.0,
          "recommend_fusion: thresholds must lie in (0,1)");
  if (false_positive_rate(a) > t.fpr_high && false_positive_rate(b) > t.fpr_high) return Recommendation::intersection;
  if (false_negative_rate(a) > t.fnr_high && false_negative_rate(b) > t.fnr_high) return Recommendation::union_;
  return Recommendation::none;
}

enum class FusionCandidate { a, b, union_, intersection };

inline constexpr std::array<FusionCandidate, 4> kFusionCandidates{FusionCandidate::a, FusionCandidate::b,
                                                                  FusionCandidate::union_,
                                                                  FusionCandidate::intersection};

struct FusionEvaluation {
  std::array<MetricValue, 4> dice;  // indexed like kFusionCandidates
  FusionCandidate best = FusionCandidate::a;

  const MetricValue& dice_of(FusionCandidate c) const { return dice[static_cast<std::size_t>(c)]; }
};

/// Dice of a, b, a|b and a&b against the ground truth; the best candidate wins,
/// earlier candidates winning ties.
inline FusionEvaluation best_fusion_oracle(const BinaryMask& gt, const BinaryMask& a, const BinaryMask& b) {
  require_same_extent(gt, a, "best_fusion_oracle");
  require_same_extent(gt, b, "best_fusion_oracle");
  FusionEvaluation e;
  e.dice[0] = dice(confusion(gt, a));
  e.dice[1] = dice(confusion(gt, b));
  e.dice[2] = dice(confusion(gt, fuse(a, b, FusionOp::union_)));
  e.dice[3] = dice(confusion(gt, fuse(a, b, FusionOp::intersection)));
  std::size_t best = 0;
  for (std::size_t i = 1; i < e.dice.size(); ++i) {
    if (*e.dice[i].value > *e.dice[best].value) best = i;
  }
  e.best = kFusionCandidates[best];
  return e;
}

struct FusionResult {
  Recommendation op = Recommendation::none;
  BinaryMask fused;
  MetricValue dice_before_a, dice_before_b, dice_after;
};

/// Applies the recommender's choice; with no recommendation the fused mask is a.
inline FusionResult fuse_recommended(const BinaryMask& gt, const BinaryMask& a, const BinaryMask& b,
                                     const FusionThresholds& t = {}) {
  FusionResult r;
  r.op = recommend_fusion(confusion(gt, a), confusion(gt, b), t);
  r.fused = r.op == Recommendation::none ? a
                                         : fuse(a, b, r.op == Recommendation::union_ ? FusionOp::union_
                                                                                      : FusionOp::intersection);
  r.dice_before_a = dice(confusion(gt, a));
  r.dice_before_b = dice(confusion(gt, b));
  r.dice_after = dice(confusion(gt, r.fused));
  return r;
}

}  // namespace segstat
