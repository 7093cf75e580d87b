#pragma once

#include <stdexcept>
#include <string>

namespace cst {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (zero vector, coincident points).
struct DomainError : Error {
  using Error::Error;
};

/// Geometric configuration where a formula degenerates (collinear points).
struct SingularConfiguration : Error {
  using Error::Error;
};

/// Energy or angle outside the kinematically reachable range.
struct OutOfRange : Error {
  using Error::Error;
};

/// Inconsistent or invalid configuration values.
struct ConfigError : Error {
  using Error::Error;
};

/// Vector / operator dimensions do not agree.
struct ShapeMismatch : Error {
  using Error::Error;
};

/// Operator, spectrum and image were produced for different setups.
struct FingerprintMismatch : Error {
  using Error::Error;
};

/// Malformed file contents.
struct FormatError : Error {
  using Error::Error;
};

/// Data file lacks the ballistic channel required by a CT step.
struct MissingBallistic : Error {
  using Error::Error;
};

/// Polychromatic levels closer than the detector energy resolution.
struct LevelSpacingError : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace cst
