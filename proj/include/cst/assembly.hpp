#pragma once

#include "cst/forward.hpp"
#include "cst/sparse.hpp"

namespace cst {

/// Rows are (source, detector) rays, columns pixels, entries the path length
/// in cm through each pixel, using the same sampler as ray_integral.
SparseOperator assemble_xray(const ScanGeometry& geometry, std::size_t n, double fov,
                             double step_fraction = 0.5);

struct AssemblyOptions {
  FirstOrderOptions first;
  double prior_blur_px = 0.0;  // optional Gaussian smoothing of the prior
};

/// Linearized single-scatter operator with attenuation frozen at `prior`.
/// Row index is (source * n_det + detector) * n_bins + bin.
SparseOperator assemble_l1(const DensityImage& prior, const ScanGeometry& geometry,
                           const EnergyGrid& grid, double E0, const AssemblyOptions& options = {});

/// Weighted sum of assemble_l1 over the lines of `source`.
SparseOperator assemble_l1_poly(const DensityImage& prior, const ScanGeometry& geometry,
                                const EnergyGrid& grid, const PolySource& source,
                                const AssemblyOptions& options = {});

/// Fingerprint record attached to operators and checked against data.
nlohmann::json setup_fingerprints(const ScanGeometry& geometry, const EnergyGrid* grid,
                                  const DensityImage& layout);

/// Throws FingerprintMismatch unless the two fingerprint records agree on
/// every key present in both.
void check_fingerprints(const nlohmann::json& a, const nlohmann::json& b, const char* what);

}  // namespace cst
