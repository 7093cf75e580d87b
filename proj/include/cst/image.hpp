#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cst/vec2.hpp"

namespace cst {

/// Square electron-density map relative to water. Row 0 is the top of the
/// image; coordinates are cm with the origin at the image centre.
struct DensityImage {
  std::size_t n = 0;
  double fov = 0.0;  // cm, side length
  std::vector<double> values;

  DensityImage() = default;
  DensityImage(std::size_t n_, double fov_) : n(n_), fov(fov_), values(n_ * n_, 0.0) {}

  [[nodiscard]] double pixel_size() const { return fov / static_cast<double>(n); }
  [[nodiscard]] double pixel_area() const { return pixel_size() * pixel_size(); }
  [[nodiscard]] std::size_t size() const { return values.size(); }

  [[nodiscard]] double& at(std::size_t row, std::size_t col) { return values[row * n + col]; }
  [[nodiscard]] double at(std::size_t row, std::size_t col) const { return values[row * n + col]; }

  /// Centre of pixel (row, col) in cm.
  [[nodiscard]] Point center(std::size_t row, std::size_t col) const {
    const double h = pixel_size();
    return {-0.5 * fov + (static_cast<double>(col) + 0.5) * h,
            0.5 * fov - (static_cast<double>(row) + 0.5) * h};
  }
  [[nodiscard]] Point center(std::size_t index) const { return center(index / n, index % n); }

  /// Flat index of the pixel containing p (cm), or -1 outside the image.
  [[nodiscard]] std::ptrdiff_t index_of(Point p) const {
    const double h = pixel_size();
    const double fc = (p.x + 0.5 * fov) / h;
    const double fr = (0.5 * fov - p.y) / h;
    if (!(fc >= 0.0 && fr >= 0.0)) return -1;
    const auto c = static_cast<std::size_t>(fc);
    const auto r = static_cast<std::size_t>(fr);
    if (c >= n || r >= n) return -1;
    return static_cast<std::ptrdiff_t>(r * n + c);
  }

  /// Nearest-pixel lookup at p (cm); zero outside the image.
  [[nodiscard]] double lookup(Point p) const {
    const auto i = index_of(p);
    return i < 0 ? 0.0 : values[static_cast<std::size_t>(i)];
  }

  /// Sum of values times pixel area (cm^2).
  [[nodiscard]] double mass() const;

  [[nodiscard]] bool is_zero() const;

  /// Layout fingerprint (size and field of view, not the values).
  [[nodiscard]] std::uint64_t layout_fingerprint() const;
  /// Fingerprint including the pixel values.
  [[nodiscard]] std::uint64_t content_fingerprint() const;
};

/// Mask of pixels whose centre lies within `radius_cm` of the origin.
std::vector<char> support_mask(const DensityImage& image, double radius_cm);

/// Nearest-neighbour resampling of `image` onto an m x m grid with the same field of view.
DensityImage resample_nearest(const DensityImage& image, std::size_t m);

/// Separable Gaussian blur with standard deviation in pixels (replicate boundary).
DensityImage gaussian_blur(const DensityImage& image, double sigma_px);

}  // namespace cst
