#include "cst/image.hpp"

#include <algorithm>
#include <cmath>

#include "cst/hash.hpp"

namespace cst {

double DensityImage::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * pixel_area();
}

bool DensityImage::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::uint64_t DensityImage::layout_fingerprint() const {
  Fnv1a h;
  h.str("image");
  h.u64(n);
  h.f64(fov);
  return h.value();
}

std::uint64_t DensityImage::content_fingerprint() const {
  Fnv1a h;
  h.u64(layout_fingerprint());
  h.f64s(values);
  return h.value();
}

std::vector<char> support_mask(const DensityImage& image, double radius_cm) {
  std::vector<char> mask(image.size(), 0);
  const double r2 = radius_cm * radius_cm;
  for (std::size_t i = 0; i < image.size(); ++i) {
    mask[i] = image.center(i).norm2() <= r2 ? 1 : 0;
  }
  return mask;
}

DensityImage resample_nearest(const DensityImage& image, std::size_t m) {
  DensityImage out(m, image.fov);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = image.lookup(out.center(i));
  return out;
}

DensityImage gaussian_blur(const DensityImage& image, double sigma_px) {
  if (!(sigma_px > 0.0)) return image;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma_px));
  std::vector<double> kernel;
  double norm = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma_px * sigma_px));
    kernel.push_back(w);
    norm += w;
  }
  for (double& w : kernel) w /= norm;
  const auto n = static_cast<std::ptrdiff_t>(image.n);
  auto clampi = [n](std::ptrdiff_t i) { return std::clamp<std::ptrdiff_t>(i, 0, n - 1); };
  DensityImage tmp = image;
  DensityImage out = image;
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    for (std::ptrdiff_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += kernel[static_cast<std::size_t>(k + radius)] *
             image.values[static_cast<std::size_t>(r * n + clampi(c + k))];
      }
      tmp.values[static_cast<std::size_t>(r * n + c)] = s;
    }
  }
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    for (std::ptrdiff_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        s += kernel[static_cast<std::size_t>(k + radius)] *
             tmp.values[static_cast<std::size_t>(clampi(r + k) * n + c)];
      }
      out.values[static_cast<std::size_t>(r * n + c)] = s;
    }
  }
  return out;
}

}  // namespace cst
