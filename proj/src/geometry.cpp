#include "cst/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cst/errors.hpp"
#include "cst/hash.hpp"
#include "cst/physics.hpp"

namespace cst {

namespace {
constexpr double kPi = std::numbers::pi;

Point unit_at(double angle) { return {std::cos(angle), std::sin(angle)}; }
}  // namespace

ScanGeometry ScanGeometry::make(std::size_t n_sources, std::size_t n_detectors,
                                double physical_scale, double support_radius,
                                double margin) {
  if (n_sources == 0 || n_detectors == 0) throw ConfigError("geometry needs sources and detectors");
  if (!(support_radius > 0.0 && support_radius < 1.0)) {
    throw ConfigError("support radius must lie in (0, 1)");
  }
  ScanGeometry g;
  g.n_sources = n_sources;
  g.n_detectors_per_source = n_detectors;
  g.physical_scale = physical_scale;
  g.support_radius = support_radius;
  for (std::size_t i = 0; i < n_sources; ++i) {
    g.source_angles.push_back(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n_sources));
  }
  const double theta_max = std::min(std::asin(support_radius), kPi / 2.0 - 2.0 * margin);
  const double dtheta = 2.0 * theta_max / static_cast<double>(n_detectors);
  for (std::size_t j = 0; j < n_detectors; ++j) {
    g.fan_angles.push_back(-theta_max + (static_cast<double>(j) + 0.5) * dtheta);
  }
  g.validate(margin);
  return g;
}

Point ScanGeometry::source(std::size_t i) const { return unit_at(source_angles.at(i)); }

Point ScanGeometry::detector(std::size_t i, std::size_t j) const {
  const double alpha = source_angles.at(i);
  const double theta = fan_angles.at(j);
  return source(i) + unit_at(alpha + kPi + theta) * (2.0 * std::cos(theta));
}

void ScanGeometry::validate(double margin) const {
  if (source_angles.size() != n_sources || fan_angles.size() != n_detectors_per_source) {
    throw ConfigError("geometry angle lists do not match their counts");
  }
  if (n_sources == 0 || n_detectors_per_source == 0) throw ConfigError("empty geometry");
  if (!(support_radius > 0.0 && support_radius < 1.0)) {
    throw ConfigError("support radius must lie in (0, 1)");
  }
  if (!(physical_scale > 0.0)) throw ConfigError("physical scale must be positive");
  for (double t : fan_angles) {
    if (!(std::abs(t) < kPi / 2.0 - margin)) {
      throw ConfigError("fan angle " + std::to_string(t) + " too close to +-pi/2");
    }
  }
}

std::uint64_t ScanGeometry::fingerprint() const {
  Fnv1a h;
  h.str("geometry");
  h.u64(n_sources);
  h.f64s(source_angles);
  h.u64(n_detectors_per_source);
  h.f64s(fan_angles);
  h.f64(physical_scale);
  h.f64(support_radius);
  return h.value();
}

ArcSpec ArcSpec::make(Point s, Point d, double omega) {
  if (s == d) throw DomainError("arc source and detector coincide");
  if (!(omega > 0.0 && omega < kPi)) throw DomainError("arc angle must lie in (0, pi)");
  return ArcSpec{s, d, omega, std::cos(omega) / std::sin(omega)};
}

KappaRho kappa_rho(Vec2 a, Vec2 b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("kappa_rho: zero vector");
  return {std::clamp(a.dot(b) / (na * nb), -1.0, 1.0), na / nb};
}

double phi(Vec2 a, Vec2 b) {
  const auto [kappa, rho] = kappa_rho(a, b);
  const double s2 = 1.0 - kappa * kappa;
  if (!(s2 > 0.0)) throw SingularConfiguration("phi: collinear arguments");
  return (kappa - rho) / std::sqrt(s2);
}

Vec2 grad_phi(Point x, Point s, Point d) {
  const Vec2 a = x - s;
  const Vec2 b = d - s;
  if (a.norm2() == 0.0 || (d - x).norm2() == 0.0) throw SingularConfiguration("grad_phi: x at s or d");
  const auto [kappa, rho] = kappa_rho(a, b);
  const double s2 = 1.0 - kappa * kappa;
  if (!(s2 > 0.0)) throw SingularConfiguration("grad_phi: x collinear with s and d");
  const double na = a.norm();
  const Vec2 us = a / na;
  const Vec2 ud = b / b.norm();
  const double root = std::sqrt(s2);
  return (ud - us * kappa) * ((1.0 - rho * kappa) / (na * s2 * root)) - us * (rho / (na * root));
}

double scatter_angle(Point x, Point s, Point d) {
  const Vec2 a = x - s;
  const Vec2 b = d - x;
  // atan2 form is accurate near 0 and pi where acos of the cosine is not.
  return std::atan2(std::abs(a.cross(b)), a.dot(b));
}

std::vector<ArcSample> arc_sample(const ArcSpec& arc, const ScanGeometry& geometry,
                                  double step) {
  if (!(step > 0.0)) throw DomainError("arc_sample: step must be positive");
  const Point s = arc.source;
  const Point d = arc.detector;
  const Vec2 chord = d - s;
  const double len = chord.norm();
  const Vec2 n = chord.perp() / len;
  const Point m = (s + d) * 0.5;
  const double radius = len / (2.0 * std::sin(arc.omega));
  const double support2 = geometry.support_radius * geometry.support_radius;

  std::vector<ArcSample> out;
  for (double side : {1.0, -1.0}) {
    // The chord is seen under pi - omega from this branch, so the circle
    // centre sits at -R cos(omega) along the branch normal.
    const Point c = m - n * (side * radius * std::cos(arc.omega));
    const double a_s = std::atan2(s.y - c.y, s.x - c.x);
    const double a_d = std::atan2(d.y - c.y, d.x - c.x);
    const Vec2 top = n * side;
    const double a_top = std::atan2(top.y, top.x);
    // Sweep from a_s towards a_d in the orientation that passes a_top.
    auto ccw_gap = [](double from, double to) {
      double g = std::fmod(to - from, 2.0 * kPi);
      return g < 0.0 ? g + 2.0 * kPi : g;
    };
    double dir = 1.0;
    double span = ccw_gap(a_s, a_d);
    if (ccw_gap(a_s, a_top) > span) {
      dir = -1.0;
      span = 2.0 * kPi - span;
    }
    const double arc_len = radius * span;
    const auto count = static_cast<std::size_t>(std::ceil(arc_len / step));
    const double dt = span / static_cast<double>(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double t = a_s + dir * (static_cast<double>(k) + 0.5) * dt;
      const Point x = c + unit_at(t) * radius;
      if (x.norm2() <= support2) out.push_back({x, radius * dt});
    }
  }
  return out;
}

SecondScatterResult second_scatter_point(Point s, Point x, Point d, double omega1,
                                         double omega2, double eps_r) {
  const Vec2 a = x - s;
  const Vec2 b = d - x;
  const double na = a.norm();
  const double nb = b.norm();
  SecondScatterResult res;
  if (na == 0.0 || nb == 0.0) return res;
  res.beta = std::atan2(a.y, a.x);
  // Rotation R maps (0,1) onto v = (d-x)/|d-x|; eta2 is the second entry of R^T u.
  const Vec2 v = b / nb;
  const double t = omega1 - res.beta + kPi / 2.0;
  const Vec2 u{std::sin(t), std::cos(t)};
  res.eta2 = std::clamp(v.x * u.x + v.y * u.y, -1.0, 1.0);
  const double sin2 = std::sin(omega2);
  if (!(sin2 > 0.0)) return res;
  const double cot2 = std::cos(omega2) / sin2;
  res.r = nb * (res.eta2 - cot2 * std::sqrt(1.0 - res.eta2 * res.eta2));
  res.y = x + u * res.r;
  res.valid = std::isfinite(res.r) && res.r > eps_r;
  return res;
}

double dr_domega1(Point s, Point x, Point d, double omega1, double omega2, double domega2) {
  const double sin2 = std::sin(omega2);
  if (!(sin2 >= 1e-9)) throw SingularConfiguration("dr_domega1: sin(omega2) below 1e-9");
  const Vec2 a = x - s;
  const Vec2 b = d - x;
  const double nb = b.norm();
  if (a.norm2() == 0.0 || nb == 0.0) throw SingularConfiguration("dr_domega1: x at s or d");
  const Vec2 v = b / nb;
  const double beta = std::atan2(a.y, a.x);
  const double t = omega1 - beta + kPi / 2.0;
  const double eta2 = v.x * std::sin(t) + v.y * std::cos(t);
  const double deta2 = v.x * std::cos(t) - v.y * std::sin(t);
  const double root = std::sqrt(std::max(0.0, 1.0 - eta2 * eta2));
  if (!(root > 1e-14)) throw SingularConfiguration("dr_domega1: second leg parallel to d - x");
  const double cot2 = std::cos(omega2) / sin2;
  return nb * (deta2 * (1.0 + cot2 * eta2 / root) + domega2 * root / (sin2 * sin2));
}

double dr_domega1_lambda(Point s, Point x, Point d, double omega1, double lambda) {
  const auto omega2 = omega2_of_omega1(omega1, lambda);
  if (!omega2) throw DomainError("dr_domega1_lambda: no second angle for this lambda");
  const double sin2 = std::sin(*omega2);
  if (!(sin2 >= 1e-9)) throw SingularConfiguration("dr_domega1: sin(omega2) below 1e-9");
  return dr_domega1(s, x, d, omega1, *omega2, -std::sin(omega1) / sin2);
}

bool immersion_condition(Point x, const ScanGeometry& geometry) {
  for (std::size_t i = 0; i < geometry.n_sources; ++i) {
    const Point s = geometry.source(i);
    const Vec2 a = x - s;
    const double r = a.norm();
    const double xi = std::atan2(a.y, a.x) - (geometry.source_angles[i] + kPi);
    for (double theta : geometry.fan_angles) {
      const double t = 2.0 * std::cos(theta);
      const double dt = -2.0 * std::sin(theta);
      const double rhs = t * std::cos(theta - xi) - dt * std::sin(theta - xi);
      if (std::abs(r - rhs) <= 1e-9 * std::max(1.0, std::abs(r))) return false;
    }
  }
  return true;
}

}  // namespace cst
