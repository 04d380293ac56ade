// Scores two predicted masks against a ground truth and suggests a fusion.
//
//   compare_masks GT.png A.png B.png

#include <iostream>

#include <fmt/format.h>

#include "segstat/ensemble.hpp"
#include "segstat/mask_core.hpp"
#include "segstat/metrics.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: compare_masks GT.png A.png B.png\n";
    return 1;
  }
  try {
    const auto gt = segstat::load_mask(argv[1], segstat::MaskKind::ground_truth);
    const auto a = segstat::load_mask(argv[2], segstat::MaskKind::prediction);
    const auto b = segstat::load_mask(argv[3], segstat::MaskKind::prediction);

    for (const auto* mask : {&a, &b}) {
      const auto counts = segstat::confusion(gt, *mask);
      fmt::print("{}: dice={:.4f} sensitivity={:.4f} specificity={:.4f}\n", mask == &a ? "A" : "B",
                 *segstat::dice(counts).value, *segstat::sensitivity(counts).value,
                 *segstat::specificity(counts).value);
    }
    const auto delta = segstat::delta_m(*segstat::dice(segstat::confusion(gt, a)).value,
                                        *segstat::dice(segstat::confusion(gt, b)).value);
    fmt::print("delta dice (A - B) = {:+.4f}\n", delta.value);

    const auto best = segstat::best_fusion_oracle(gt, a, b);
    const char* names[] = {"A", "B", "union", "intersection"};
    fmt::print("best candidate: {}\n", names[static_cast<int>(best.best)]);
    fmt::print("recommended without ground truth: {}\n",
               segstat::to_string(segstat::recommend_fusion(segstat::confusion(gt, a), segstat::confusion(gt, b))));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
