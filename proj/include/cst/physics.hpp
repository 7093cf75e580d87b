#pragma once

#include <optional>
#include <vector>

namespace cst {

struct PhysicsConstants {
  double electron_rest_energy = 0.511;          // MeV
  double classical_electron_radius = 2.8179403e-13;  // cm
  double n_e_water = 3.343e23;                  // electrons per cm^3
};

inline constexpr PhysicsConstants kPhysics{};

/// Photon energy after a single Compton scatter through `omega`.
double compton_energy(double E0, double omega);

/// Inverse of compton_energy. Throws OutOfRange outside [backscatter, E0].
double compton_angle(double E0, double E);

/// Lowest energy reachable by one scatter (omega = pi).
double backscatter_energy(double E0);

/// cos(w1) + cos(w2) for a two-scatter cascade ending at E.
/// Throws OutOfRange unless the result lies in the open interval (0, 2).
double lambda_of_E(double E0, double E);

/// Same expression without the range check.
double lambda_unchecked(double E0, double E) noexcept;

/// Inverse of lambda_unchecked.
double energy_of_lambda(double E0, double lambda);

/// Second scatter angle in [0, pi] that completes the cascade, if any.
std::optional<double> omega2_of_omega1(double omega1, double lambda);

/// Klein-Nishina probability, normalized so that P(0) = 1.
double klein_nishina_P(double omega, double E0);

/// Total Klein-Nishina cross section per electron in cm^2.
double sigma_total(double E);

/// Linear attenuation of water (cm^-1) at energy E.
double mu_water(double E);

struct SourceLevel {
  double energy = 0.0;  // MeV
  double weight = 0.0;
};

/// Discrete-line source. Weights sum to one, energies strictly increase.
struct PolySource {
  std::vector<SourceLevel> levels;
  double total_intensity = 1.0;

  static PolySource mono(double E0, double intensity = 1.0);
  static PolySource cobalt60(double intensity = 1.0);

  /// Throws ConfigError for bad weights/order and LevelSpacingError when
  /// two lines are closer than `resolution` MeV.
  void validate(double resolution) const;

  [[nodiscard]] double max_energy() const;
};

}  // namespace cst
