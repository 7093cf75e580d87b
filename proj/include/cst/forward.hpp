#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cst/geometry.hpp"
#include "cst/image.hpp"
#include "cst/physics.hpp"
#include "cst/spectrum.hpp"

namespace cst {

/// Integral of the relative density along a -> b (geometry units), in cm.
/// Midpoint rule with spacing step_fraction * pixel size.
double ray_integral(const DensityImage& density, Point a, Point b, double physical_scale,
                    double step_fraction = 0.5);

struct AttenuationContext {
  const DensityImage& density;
  double energy;          // MeV
  double physical_scale;  // cm per geometry unit
  double step_fraction = 0.5;
};

/// |a - b|^-2 exp(-int mu_E) with distances in cm.
double attenuation_factor(const AttenuationContext& ctx, Point a, Point b);

/// Line integrals of the relative density (cm) for every (source, detector) pair.
std::vector<double> projection_lengths(const DensityImage& density, const ScanGeometry& geometry,
                                       double step_fraction = 0.5);

/// Ballistic counts I exp(-sigma(E0) n_w L) per (source, detector) pair.
std::vector<double> xray_transform(const DensityImage& density, const ScanGeometry& geometry,
                                   double E0, double intensity = 1.0, double step_fraction = 0.5);

struct FirstOrderOptions {
  std::size_t subsampling = 2;  // k x k samples per pixel
  double intensity = 1.0;
  double step_fraction = 0.5;
};

/// Samples of the single-scatter integrand. For each (source, detector) pair
/// it yields (pixel, bin, weight) where weight excludes the density of the
/// scattering pixel itself; attenuation is taken from `attenuation_density`.
/// Both forward_t1 and assemble_l1 are built on this, so they agree exactly.
class FirstOrderKernel {
 public:
  struct Entry {
    std::uint32_t pixel;
    std::uint32_t bin;
    double weight;
  };

  FirstOrderKernel(const DensityImage& attenuation_density, const ScanGeometry& geometry,
                   const EnergyGrid& grid, double E0, const FirstOrderOptions& options);

  /// Entries for one pair, in a fixed order (pixel-major, then subsample).
  [[nodiscard]] std::vector<Entry> pair_entries(std::size_t pair) const;

  [[nodiscard]] std::size_t n_pixels() const { return n_pixels_; }

 private:
  struct SamplePoint {
    Point x;  // geometry units
    std::uint32_t pixel;
  };
  const DensityImage& density_;
  const ScanGeometry& geometry_;
  const EnergyGrid& grid_;
  double E0_;
  FirstOrderOptions options_;
  std::size_t n_pixels_;
  double sub_area_;
  std::vector<SamplePoint> points_;
  std::vector<double> source_factor_;  // A_E0(s, x) per (source, point)
};

/// First-order scatter spectrum. When `attenuation_density` is given, the
/// attenuation weights are frozen at that image and the result is linear in
/// `density`.
Spectrum forward_t1(const DensityImage& density, const ScanGeometry& geometry,
                    const EnergyGrid& grid, double E0, const FirstOrderOptions& options = {},
                    const DensityImage* attenuation_density = nullptr);

struct SecondOrderOptions {
  std::size_t n_omega1 = 256;
  double eps_r = 1e-3;
  double delta = 1e-3;
  double intensity = 1.0;
  double step_fraction = 0.5;
  /// First scattering sites are taken on a grid coarser by this factor
  /// (block-averaged density); second sites always use the full image.
  std::size_t first_site_downsample = 1;
  /// Level curves per energy bin (midpoint rule in energy within the bin).
  std::size_t lambda_subnodes = 1;
  /// Bisection depth for angular cells whose second site sweeps more than
  /// half a pixel or leaves the valid domain; 0 gives the plain midpoint rule.
  std::size_t max_refine_depth = 12;
};

/// Second-order scatter spectrum by quadrature over the signed first angle.
Spectrum forward_t2(const DensityImage& density, const ScanGeometry& geometry,
                    const EnergyGrid& grid, double E0, const SecondOrderOptions& options = {});

struct SecondOrderOracleOptions {
  double eps_r = 1e-3;
  std::size_t y_subsampling = 1;  // k x k second sites per pixel
  double intensity = 1.0;
  double step_fraction = 0.5;
};

/// Second-order spectrum by binning every ordered pair of pixels through the
/// pairwise level-set function. Quadratic in the pixel count; small images only.
Spectrum forward_t2_oracle(const DensityImage& density, const ScanGeometry& geometry,
                           const EnergyGrid& grid, double E0,
                           const SecondOrderOracleOptions& options = {});

/// Norm of the y-gradient of the pairwise level-set function (geometry units).
double psi_gradient_norm(Point s, Point x, Point y, Point d);

/// Value of the pairwise level-set function, i.e. cos(omega1) + cos(omega2).
double psi(Point s, Point x, Point y, Point d);

struct PolyOptions {
  FirstOrderOptions first;
  SecondOrderOptions second;
};

/// Weighted sum over source lines. order 0 fills only the ballistic channel,
/// order 1 adds single scatter, order 2 adds double scatter.
Spectrum forward_poly(const DensityImage& density, const ScanGeometry& geometry,
                      const EnergyGrid& grid, const PolySource& source, int order,
                      const PolyOptions& options = {});

/// Poisson noise at a given emitted-photon budget per source. Counts are
/// scaled by photons / intensity, drawn, and scaled back. Deterministic in seed.
Spectrum add_poisson_noise(const Spectrum& spectrum, double photons_per_source,
                           std::uint64_t seed);

/// Pixel indices whose centres lie inside the geometry's support disk.
std::vector<std::size_t> support_pixels(const DensityImage& image, const ScanGeometry& geometry);

}  // namespace cst
