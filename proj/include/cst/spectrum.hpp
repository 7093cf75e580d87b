#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace cst {

/// Monotone energy bin edges in MeV. Bins are half-open [lo, hi) except the
/// last, which also includes its upper edge.
struct EnergyGrid {
  std::vector<double> edges;

  static EnergyGrid uniform(double lo, double hi, std::size_t n_bins);
  static EnergyGrid default_grid(std::size_t n_bins) { return uniform(0.355, 1.173, n_bins); }

  [[nodiscard]] std::size_t n_bins() const { return edges.empty() ? 0 : edges.size() - 1; }
  [[nodiscard]] double lo() const { return edges.front(); }
  [[nodiscard]] double hi() const { return edges.back(); }
  [[nodiscard]] double width(std::size_t b) const { return edges[b + 1] - edges[b]; }
  [[nodiscard]] double midpoint(std::size_t b) const { return 0.5 * (edges[b] + edges[b + 1]); }
  /// Largest bin width; the detector energy resolution.
  [[nodiscard]] double resolution() const;
  [[nodiscard]] bool is_uniform(double rel_tol = 1e-9) const;

  /// Bin containing E, or -1 when E is outside the grid.
  [[nodiscard]] std::ptrdiff_t bin_of(double E) const;

  void validate() const;
  [[nodiscard]] std::uint64_t fingerprint() const;

  bool operator==(const EnergyGrid&) const = default;
};

/// Bin-integrated photon counts indexed (source, detector, bin) plus the
/// ballistic channel indexed (level, source, detector).
struct Spectrum {
  std::size_t n_sources = 0;
  std::size_t n_detectors = 0;
  EnergyGrid grid;
  std::vector<double> counts;
  std::size_t n_levels = 1;
  std::vector<double> ballistic;  // empty when the channel is absent
  nlohmann::json metadata = nlohmann::json::object();

  Spectrum() = default;
  Spectrum(std::size_t n_src, std::size_t n_det, EnergyGrid g)
      : n_sources(n_src), n_detectors(n_det), grid(std::move(g)),
        counts(n_src * n_det * grid.n_bins(), 0.0) {}

  [[nodiscard]] std::size_t n_bins() const { return grid.n_bins(); }
  [[nodiscard]] std::size_t n_pairs() const { return n_sources * n_detectors; }
  [[nodiscard]] std::size_t index(std::size_t s, std::size_t d, std::size_t b) const {
    return (s * n_detectors + d) * n_bins() + b;
  }
  [[nodiscard]] double& at(std::size_t s, std::size_t d, std::size_t b) { return counts[index(s, d, b)]; }
  [[nodiscard]] double at(std::size_t s, std::size_t d, std::size_t b) const { return counts[index(s, d, b)]; }
  [[nodiscard]] std::span<double> row(std::size_t pair) {
    return {counts.data() + pair * n_bins(), n_bins()};
  }
  [[nodiscard]] std::span<const double> row(std::size_t pair) const {
    return {counts.data() + pair * n_bins(), n_bins()};
  }

  [[nodiscard]] bool has_ballistic() const { return !ballistic.empty(); }
  [[nodiscard]] double& ballistic_at(std::size_t level, std::size_t pair) {
    return ballistic[level * n_pairs() + pair];
  }
  [[nodiscard]] double ballistic_at(std::size_t level, std::size_t pair) const {
    return ballistic[level * n_pairs() + pair];
  }

  /// Element-wise sum of counts and ballistic channels; shapes must match.
  Spectrum& operator+=(const Spectrum& other);
  Spectrum& operator*=(double s);

  /// Throws ShapeMismatch when layout or grids differ.
  void check_compatible(const Spectrum& other) const;
};

}  // namespace cst
