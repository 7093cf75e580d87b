#include "cst/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "cst/errors.hpp"
#include "cst/parallel.hpp"

namespace cst {

std::vector<double> smoothed_derivative(std::span<const double> row, double bin_width,
                                        const DerivativeConfig& config) {
  const std::size_t n = row.size();
  if (n < 4) throw ConfigError("smoothed derivative needs at least 4 samples");
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
  const double gamma = config.resolved_gamma(bin_width);

  std::vector<double> ext(row.begin(), row.end());
  if (config.boundary == BoundaryRule::EvenReflection) ext.insert(ext.end(), row.rbegin(), row.rend());
  const std::size_t N = ext.size();
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<std::complex<double>> spec(N);
  for (std::size_t k = 0; k < N; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double ang = -two_pi * static_cast<double>((k * j) % N) / static_cast<double>(N);
      s += ext[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    spec[k] = s;
  }
  for (std::size_t k = 0; k < N; ++k) {
    if (2 * k == N) {
      spec[k] = 0.0;  // Nyquist term has no consistent derivative
      continue;
    }
    const double kk = 2 * k < N ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(N);
    const double zeta = two_pi * kk / (static_cast<double>(N) * bin_width);
    const double gain = std::exp(-0.5 * (gamma * zeta) * (gamma * zeta));
    spec[k] *= std::complex<double>(0.0, zeta * gain);
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double ang = two_pi * static_cast<double>((k * j) % N) / static_cast<double>(N);
      s += (spec[k] * std::complex<double>(std::cos(ang), std::sin(ang))).real();
    }
    out[j] = s / static_cast<double>(N);
  }
  return out;
}

SpectralDerivative::SpectralDerivative(std::size_t n, double bin_width, const DerivativeConfig& config)
    : n_(n), m_(n * n, 0.0) {
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const auto col = smoothed_derivative(e, bin_width, config);
    for (std::size_t i = 0; i < n; ++i) m_[i * n + j] = col[i];
    e[j] = 0.0;
  }
}

void SpectralDerivative::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += m_[i * n_ + j] * in[j];
    out[i] = s;
  }
}

void SpectralDerivative::apply_transpose(std::span<const double> in, std::span<double> out) const {
  for (std::size_t j = 0; j < n_; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double v = in[i];
    for (std::size_t j = 0; j < n_; ++j) out[j] += m_[i * n_ + j] * v;
  }
}

void apply_D_blocks(const SpectralDerivative& D, std::span<const double> in, std::span<double> out,
                    bool transpose) {
  const std::size_t n = D.size();
  if (in.size() != out.size() || in.size() % n != 0) throw ShapeMismatch("derivative block size");
  parallel_for(in.size() / n, [&](std::size_t b) {
    if (transpose) {
      D.apply_transpose(in.subspan(b * n, n), out.subspan(b * n, n));
    } else {
      D.apply(in.subspan(b * n, n), out.subspan(b * n, n));
    }
  });
}

std::vector<double> apply_D_to_spectrum(const Spectrum& spectrum, const DerivativeConfig& config) {
  if (!spectrum.grid.is_uniform()) throw ConfigError("smoothed derivative needs a uniform energy grid");
  const SpectralDerivative D(spectrum.n_bins(), spectrum.grid.width(0), config);
  std::vector<double> out(spectrum.counts.size());
  apply_D_blocks(D, spectrum.counts, out, false);
  return out;
}

DerivativeComposedMap::DerivativeComposedMap(const LinearMap& op, const EnergyGrid& grid,
                                             const DerivativeConfig& config)
    : op_(op), d_(grid.n_bins(), grid.width(0), config) {
  if (!grid.is_uniform()) throw ConfigError("smoothed derivative needs a uniform energy grid");
  if (op.rows() % grid.n_bins() != 0) throw ShapeMismatch("operator rows are not whole spectra");
}

void DerivativeComposedMap::apply(std::span<const double> x, std::span<double> y) const {
  std::vector<double> tmp(op_.rows());
  op_.apply(x, tmp);
  apply_D_blocks(d_, tmp, y, false);
}

void DerivativeComposedMap::apply_adjoint(std::span<const double> y, std::span<double> x) const {
  std::vector<double> tmp(op_.rows());
  apply_D_blocks(d_, y, tmp, true);
  op_.apply_adjoint(tmp, x);
}

}  // namespace cst
