#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cst/vec2.hpp"

namespace cst {

/// Fan-beam layout on the unit circle. Sources sit at equally spaced angles;
/// detector j of source i is where the ray leaving s at fan angle theta_j
/// (measured from the direction towards the centre) meets the circle again.
struct ScanGeometry {
  std::size_t n_sources = 0;
  std::vector<double> source_angles;
  std::size_t n_detectors_per_source = 0;
  std::vector<double> fan_angles;
  double physical_scale = 1.0;  // cm per geometry unit
  double support_radius = 0.95;

  /// Equally spaced sources and a symmetric fan that just covers the
  /// support disk. `margin` bounds the fan away from +-pi/2.
  static ScanGeometry make(std::size_t n_sources, std::size_t n_detectors,
                           double physical_scale, double support_radius,
                           double margin = 1e-3);

  [[nodiscard]] Point source(std::size_t i) const;
  [[nodiscard]] Point detector(std::size_t i, std::size_t j) const;
  [[nodiscard]] std::size_t n_pairs() const { return n_sources * n_detectors_per_source; }

  /// Throws ConfigError if any stated invariant is violated.
  void validate(double margin = 1e-3) const;

  [[nodiscard]] std::uint64_t fingerprint() const;
};

struct KappaRho {
  double kappa;
  double rho;
};

struct ArcSpec {
  Point source;
  Point detector;
  double omega = 0.0;
  double p = 0.0;  // cot(omega)

  static ArcSpec make(Point s, Point d, double omega);
};

struct ArcSample {
  Point x;
  double weight;  // arc length represented by this sample
};

struct SecondScatterResult {
  Point y;
  double r = 0.0;
  double eta2 = 0.0;
  double beta = 0.0;
  double dr_domega1 = 0.0;  // filled only by callers that need it
  bool valid = false;
};

KappaRho kappa_rho(Vec2 a, Vec2 b);

/// Level-set function whose value cot(omega) labels the arc through s + a.
double phi(Vec2 a, Vec2 b);

/// Gradient of x -> phi(x - s, d - s).
Vec2 grad_phi(Point x, Point s, Point d);

/// Unsigned angle between x - s and d - x.
double scatter_angle(Point x, Point s, Point d);

/// Points of the scattering locus of `arc` inside the support disk, both
/// branches, midpoint rule with spacing at most `step`.
std::vector<ArcSample> arc_sample(const ArcSpec& arc, const ScanGeometry& geometry,
                                  double step);

/// Second site of a two-scatter path s -> x -> y -> d with signed first
/// angle omega1 and second angle omega2.
SecondScatterResult second_scatter_point(Point s, Point x, Point d, double omega1,
                                         double omega2, double eps_r = 1e-3);

/// dr/domega1 when omega2 is a function of omega1 with derivative
/// `domega2`. Throws SingularConfiguration when sin(omega2) < 1e-9.
double dr_domega1(Point s, Point x, Point d, double omega1, double omega2,
                  double domega2);

/// dr/domega1 along the cascade cos(omega1) + cos(omega2) = lambda.
double dr_domega1_lambda(Point s, Point x, Point d, double omega1, double lambda);

/// Arc-length element sqrt(r^2 + r'^2) of y(omega1).
inline double line_element(double r, double dr) { return std::sqrt(r * r + dr * dr); }

/// Geometric condition under which the first-order operator stays an
/// immersion at x for every source and fan angle of the scanner.
bool immersion_condition(Point x, const ScanGeometry& geometry);

}  // namespace cst
