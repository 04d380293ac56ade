#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segstat/error.hpp"

namespace segstat {

struct Extent {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t area() const { return width * height; }
  friend bool operator==(const Extent&, const Extent&) = default;
};

inline std::string to_string(const Extent& e) {
  return std::to_string(e.width) + "x" + std::to_string(e.height);
}

/// Row-major single-plane raster. Pixel (x, y) lives at index y * width + x.
template <typename T>
class Raster {
public:
  using value_type = T;

  Raster() = default;
  Raster(Extent extent, T fill = T{}) : extent_(extent), data_(extent.area(), fill) {
    require(extent.width > 0 && extent.height > 0, "raster must have non-zero area");
  }
  Raster(Extent extent, std::vector<T> data) : extent_(extent), data_(std::move(data)) {
    require(extent.width > 0 && extent.height > 0, "raster must have non-zero area");
    require(data_.size() == extent.area(), "raster data size does not match " + to_string(extent));
  }

  Extent extent() const { return extent_; }
  std::size_t width() const { return extent_.width; }
  std::size_t height() const { return extent_.height; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t x, std::size_t y) { return data_[y * extent_.width + x]; }
  const T& at(std::size_t x, std::size_t y) const { return data_[y * extent_.width + x]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  Extent extent_{};
  std::vector<T> data_;
};

// Class 1 is the target (lesion, tumor, kidney); class 0 is background.
using BinaryMask = Raster<std::uint8_t>;

// Per-pixel confidence for class 1, each value in [0, 1].
using ProbabilityMap = Raster<double>;

struct Heatmap {
  Raster<double> values;
  int target_class = 1;
};

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Raster<Rgb>;

template <typename A, typename B>
void require_same_extent(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (a.extent() != b.extent()) {
    throw InputError(std::string(what) + ": dimension mismatch (" + to_string(a.extent()) +
                     " vs " + to_string(b.extent()) + ")");
  }
}

inline void validate_mask(const BinaryMask& m) {
  for (auto v : m) require(v <= 1, "binary mask values must be 0 or 1");
}

inline void validate_unit_interval(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string(what) + ": value outside [0,1]");
  }
}

}  // namespace segstat
