#include "cst/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "cst/errors.hpp"
#include "cst/hash.hpp"

namespace cst {

EnergyGrid EnergyGrid::uniform(double lo, double hi, std::size_t n_bins) {
  if (n_bins == 0 || !(hi > lo) || !(lo > 0.0)) throw ConfigError("invalid energy grid");
  EnergyGrid g;
  g.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    g.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  g.edges.back() = hi;
  return g;
}

double EnergyGrid::resolution() const {
  double r = 0.0;
  for (std::size_t b = 0; b < n_bins(); ++b) r = std::max(r, width(b));
  return r;
}

bool EnergyGrid::is_uniform(double rel_tol) const {
  if (n_bins() == 0) return false;
  const double w0 = width(0);
  for (std::size_t b = 1; b < n_bins(); ++b) {
    if (std::abs(width(b) - w0) > rel_tol * w0) return false;
  }
  return true;
}

std::ptrdiff_t EnergyGrid::bin_of(double E) const {
  if (!(E >= edges.front() && E <= edges.back())) return -1;
  if (E == edges.back()) return static_cast<std::ptrdiff_t>(n_bins()) - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), E);
  return static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
}

void EnergyGrid::validate() const {
  if (edges.size() < 2) throw ConfigError("energy grid needs at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigError("energy grid must be strictly increasing");
  }
  if (!(edges.front() > 0.0)) throw ConfigError("energy grid must be positive");
}

std::uint64_t EnergyGrid::fingerprint() const {
  Fnv1a h;
  h.str("grid");
  h.f64s(edges);
  return h.value();
}

void Spectrum::check_compatible(const Spectrum& other) const {
  if (n_sources != other.n_sources || n_detectors != other.n_detectors || !(grid == other.grid)) {
    throw ShapeMismatch("spectra have different layouts");
  }
}

Spectrum& Spectrum::operator+=(const Spectrum& other) {
  check_compatible(other);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  if (other.has_ballistic()) {
    if (!has_ballistic()) {
      ballistic = other.ballistic;
      n_levels = other.n_levels;
    } else {
      if (ballistic.size() != other.ballistic.size()) throw ShapeMismatch("ballistic channels differ");
      for (std::size_t i = 0; i < ballistic.size(); ++i) ballistic[i] += other.ballistic[i];
    }
  }
  return *this;
}

Spectrum& Spectrum::operator*=(double s) {
  for (double& c : counts) c *= s;
  for (double& c : ballistic) c *= s;
  return *this;
}

}  // namespace cst
