#pragma once

// Loading, validating and comparing ground truth, predictions, probability maps
// and heatmaps; confusion counts; colour overlays and heatmap rendering.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "segstat/error.hpp"
#include "segstat/image.hpp"
#include "segstat/png_io.hpp"

namespace segstat {

enum class MaskKind { ground_truth, prediction };

// How multi-channel mask files are reduced to one plane.
enum class ChannelRule {
  reject,        // multi-channel input is an error
  any_nonblack,  // a pixel with any non-zero colour channel is class 1
};

inline ChannelRule default_channel_rule(MaskKind kind) {
  return kind == MaskKind::ground_truth ? ChannelRule::any_nonblack : ChannelRule::reject;
}

inline constexpr std::uint16_t kMaskThreshold = 128;

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const ConfusionCounts& c) {
  return os << "{tp=" << c.tp << " fp=" << c.fp << " tn=" << c.tn << " fn=" << c.fn << "}";
}

/// Binarizes decoded PNG samples: a pixel is class 1 when its value is >= 128.
/// Colour inputs go through `rule`; alpha channels are ignored.
inline BinaryMask binarize(const png::Pixels& px, ChannelRule rule, const std::string& origin) {
  if (px.bit_depth != 8) throw InputError(origin + ": masks must be 8-bit, got " + std::to_string(px.bit_depth));
  require(px.extent.area() > 0, origin + ": zero-area mask");
  BinaryMask mask(px.extent);
  const std::size_t n = px.extent.area();
  if (px.channels <= 2) {
    for (std::size_t i = 0; i < n; ++i) mask[i] = px.sample(i, 0) >= kMaskThreshold ? 1 : 0;
    return mask;
  }
  if (rule == ChannelRule::reject) {
    throw InputError(origin + ": multi-channel mask without a channel-reduction rule");
  }
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = (px.sample(i, 0) | px.sample(i, 1) | px.sample(i, 2)) != 0 ? 1 : 0;
  }
  return mask;
}

inline BinaryMask load_mask(const std::filesystem::path& path, MaskKind /*kind*/, ChannelRule rule) {
  return binarize(png::read(path), rule, path.string());
}

inline BinaryMask load_mask(const std::filesystem::path& path, MaskKind kind) {
  return load_mask(path, kind, default_channel_rule(kind));
}

namespace detail {

inline Raster<double> load_unit_plane(const std::filesystem::path& path) {
  const auto px = png::read(path);
  if (px.channels != 1) throw InputError(path.string() + ": expected single-channel image");
  const double scale = px.bit_depth == 16 ? 65535.0 : 255.0;
  Raster<double> out(px.extent);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px.samples[i] / scale;
  return out;
}

inline std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

}  // namespace detail

/// 16-bit grayscale (value/65535); 8-bit files are accepted as value/255.
inline ProbabilityMap load_probability_map(const std::filesystem::path& path) {
  return detail::load_unit_plane(path);
}

inline Heatmap load_heatmap(const std::filesystem::path& path, int target_class) {
  require(target_class == 0 || target_class == 1, "heatmap target class must be 0 or 1");
  return Heatmap{detail::load_unit_plane(path), target_class};
}

inline void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint16_t> samples(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) samples[i] = mask[i] ? 255 : 0;
  png::write(path, mask.extent(), 1, 8, samples);
}

inline void save_unit_plane(const std::filesystem::path& path, const Raster<double>& plane) {
  validate_unit_interval(plane.values(), path.string().c_str());
  std::vector<std::uint16_t> samples(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) samples[i] = detail::quantize16(plane[i]);
  png::write(path, plane.extent(), 1, 16, samples);
}

inline void save_rgb(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint16_t> samples;
  samples.reserve(image.size() * 3);
  for (const auto& px : image) samples.insert(samples.end(), px.begin(), px.end());
  png::write(path, image.extent(), 3, 8, samples);
}

inline ConfusionCounts confusion(const BinaryMask& gt, const BinaryMask& pred) {
  require_same_extent(gt, pred, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool truth = gt[i] != 0;
    const bool predicted = pred[i] != 0;
    if (truth && predicted) ++c.tp;
    else if (!truth && predicted) ++c.fp;
    else if (!truth) ++c.tn;
    else ++c.fn;
  }
  return c;
}

namespace colors {
inline constexpr Rgb true_positive{0, 255, 0};
inline constexpr Rgb true_negative{0, 0, 0};
inline constexpr Rgb false_positive{255, 0, 0};
inline constexpr Rgb false_negative{255, 255, 0};
}  // namespace colors

/// Green TP, black TN, red FP, yellow FN.
inline RgbImage overlay(const BinaryMask& gt, const BinaryMask& pred) {
  require_same_extent(gt, pred, "overlay");
  RgbImage out(gt.extent());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool truth = gt[i] != 0;
    const bool predicted = pred[i] != 0;
    out[i] = truth ? (predicted ? colors::true_positive : colors::false_negative)
                   : (predicted ? colors::false_positive : colors::true_negative);
  }
  return out;
}

// Jet colormap sampled at k/255, k = 0..255. Each channel is
// clamp(1.5 - |4x - c|, 0, 1) with c = 3 (red), 2 (green), 1 (blue), scaled to
// 0..255 and rounded half-up. Computed in integers so the table is exact.
using Colormap = std::array<Rgb, 256>;

namespace detail {
constexpr std::uint8_t jet_channel(int k, int center) {
  // 255 * (1.5 - |4k/255 - center|) doubled to stay integral.
  int twice = 765 - 2 * std::abs(4 * k - 255 * center);
  twice = twice < 0 ? 0 : (twice > 510 ? 510 : twice);
  return static_cast<std::uint8_t>((twice + 1) / 2);
}
}  // namespace detail

constexpr Colormap make_jet_colormap() {
  Colormap table{};
  for (int k = 0; k < 256; ++k) {
    table[static_cast<std::size_t>(k)] = {detail::jet_channel(k, 3), detail::jet_channel(k, 2),
                                          detail::jet_channel(k, 1)};
  }
  return table;
}

inline constexpr Colormap kJet = make_jet_colormap();

inline std::size_t colormap_index(double v) {
  return static_cast<std::size_t>(std::floor(v * 255.0 + 0.5));
}

/// Renders a heatmap through the jet table; 0 is deepest blue, 1 deepest red.
inline RgbImage render_heatmap(const Heatmap& h) {
  validate_unit_interval(h.values.values(), "render_heatmap");
  RgbImage out(h.values.extent());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kJet[colormap_index(h.values[i])];
  return out;
}

/// The shipped colormap CSV: header `value,r,g,b`, one row per table entry.
inline std::string colormap_csv(const Colormap& table = kJet) {
  std::string out = "value,r,g,b\n";
  for (std::size_t k = 0; k < table.size(); ++k) {
    out += fmt::format("{:.6f},{},{},{}\n", static_cast<double>(k) / 255.0, table[k][0], table[k][1], table[k][2]);
  }
  return out;
}

}  // namespace segstat
