#include "cst/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cst/errors.hpp"

namespace cst {

namespace {
constexpr double kMe = kPhysics.electron_rest_energy;
}

double compton_energy(double E0, double omega) {
  return E0 / (1.0 + (E0 / kMe) * (1.0 - std::cos(omega)));
}

double backscatter_energy(double E0) { return E0 / (1.0 + 2.0 * E0 / kMe); }

double compton_angle(double E0, double E) {
  const double c = 1.0 - kMe * (1.0 / E - 1.0 / E0);
  // Allow a few ulps of slack at both ends so the exact endpoints round-trip.
  constexpr double slack = 1e-13;
  if (!(E > 0.0) || c > 1.0 + slack || c < -1.0 - slack) {
    throw OutOfRange("energy " + std::to_string(E) +
                     " MeV is not reachable by a single scatter from " +
                     std::to_string(E0) + " MeV");
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double lambda_unchecked(double E0, double E) noexcept {
  return 2.0 - kMe * (1.0 / E - 1.0 / E0);
}

double lambda_of_E(double E0, double E) {
  const double lam = lambda_unchecked(E0, E);
  if (!(lam > 0.0 && lam < 2.0)) {
    throw OutOfRange("energy " + std::to_string(E) +
                     " MeV gives lambda outside (0, 2)");
  }
  return lam;
}

double energy_of_lambda(double E0, double lambda) {
  return 1.0 / ((2.0 - lambda) / kMe + 1.0 / E0);
}

std::optional<double> omega2_of_omega1(double omega1, double lambda) {
  const double c = lambda - std::cos(omega1);
  if (c < -1.0 || c > 1.0) return std::nullopt;
  return std::acos(c);
}

double klein_nishina_P(double omega, double E0) {
  const double k = compton_energy(E0, omega) / E0;
  const double s = std::sin(omega);
  return 0.5 * k * k * (k + 1.0 / k - s * s);
}

double sigma_total(double E) {
  const double e = E / kMe;
  const double re2 = kPhysics.classical_electron_radius *
                     kPhysics.classical_electron_radius;
  if (e < 1e-3) {
    // Closed form cancels catastrophically here; Thomson limit expansion.
    return (8.0 * std::numbers::pi / 3.0) * re2 *
           (1.0 - 2.0 * e + 5.2 * e * e - 13.3 * e * e * e);
  }
  const double a = 1.0 + 2.0 * e;
  const double l = std::log(a);
  const double term1 = (1.0 + e) / (e * e) * (2.0 * (1.0 + e) / a - l / e);
  const double term2 = l / (2.0 * e);
  const double term3 = (1.0 + 3.0 * e) / (a * a);
  return 2.0 * std::numbers::pi * re2 * (term1 + term2 - term3);
}

double mu_water(double E) { return sigma_total(E) * kPhysics.n_e_water; }

PolySource PolySource::mono(double E0, double intensity) {
  return PolySource{{{E0, 1.0}}, intensity};
}

PolySource PolySource::cobalt60(double intensity) {
  return PolySource{{{1.173, 0.5}, {1.332, 0.5}}, intensity};
}

void PolySource::validate(double resolution) const {
  if (levels.empty()) throw ConfigError("source has no energy levels");
  if (!(total_intensity > 0.0)) throw ConfigError("source intensity must be positive");
  double sum = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k].energy > 0.0)) throw ConfigError("level energy must be positive");
    if (levels[k].weight < 0.0) throw ConfigError("level weight must be nonnegative");
    sum += levels[k].weight;
    if (k > 0) {
      const double gap = levels[k].energy - levels[k - 1].energy;
      if (gap <= 0.0) throw ConfigError("source levels must be strictly increasing");
      if (gap < resolution) {
        throw LevelSpacingError("source levels " + std::to_string(levels[k - 1].energy) +
                                " and " + std::to_string(levels[k].energy) +
                                " MeV are closer than the energy resolution");
      }
    }
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("source weights must sum to one");
}

double PolySource::max_energy() const {
  double m = 0.0;
  for (const auto& l : levels) m = std::max(m, l.energy);
  return m;
}

}  // namespace cst
