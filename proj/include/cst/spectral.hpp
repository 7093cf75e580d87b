#pragma once

#include <span>
#include <vector>

#include "cst/linear_map.hpp"
#include "cst/spectrum.hpp"

namespace cst {

enum class BoundaryRule { EvenReflection, Periodic };

struct DerivativeConfig {
  double gamma = -1.0;  // MeV; negative selects 3 bin widths
  BoundaryRule boundary = BoundaryRule::EvenReflection;

  [[nodiscard]] double resolved_gamma(double bin_width) const {
    return gamma < 0.0 ? 3.0 * bin_width : gamma;
  }
};

/// Fourier-domain derivative along a uniformly binned energy axis, damped by
/// the Gaussian low pass exp(-(gamma zeta)^2 / 2).
std::vector<double> smoothed_derivative(std::span<const double> row, double bin_width,
                                        const DerivativeConfig& config);

/// The smoothed derivative as an explicit n x n matrix, so that its
/// transpose is the exact adjoint.
class SpectralDerivative {
 public:
  SpectralDerivative(std::size_t n, double bin_width, const DerivativeConfig& config);

  [[nodiscard]] std::size_t size() const { return n_; }
  void apply(std::span<const double> in, std::span<double> out) const;
  void apply_transpose(std::span<const double> in, std::span<double> out) const;
  [[nodiscard]] const std::vector<double>& matrix() const { return m_; }

 private:
  std::size_t n_;
  std::vector<double> m_;  // row-major
};

/// Applies the derivative to every (source, detector) row of a spectrum and
/// returns the flattened data vector. Throws ConfigError on non-uniform grids.
std::vector<double> apply_D_to_spectrum(const Spectrum& spectrum, const DerivativeConfig& config);

/// Applies the derivative blockwise to a flat vector whose blocks have length n_bins.
void apply_D_blocks(const SpectralDerivative& D, std::span<const double> in, std::span<double> out,
                    bool transpose);

/// D o A, where D acts on consecutive row blocks of length n_bins.
class DerivativeComposedMap final : public LinearMap {
 public:
  DerivativeComposedMap(const LinearMap& op, const EnergyGrid& grid, const DerivativeConfig& config);

  [[nodiscard]] std::size_t rows() const override { return op_.rows(); }
  [[nodiscard]] std::size_t cols() const override { return op_.cols(); }
  void apply(std::span<const double> x, std::span<double> y) const override;
  void apply_adjoint(std::span<const double> y, std::span<double> x) const override;

 private:
  const LinearMap& op_;
  SpectralDerivative d_;
};

}  // namespace cst
