#include "cst/assembly.hpp"

#include <cmath>
#include <cstdio>

#include "cst/errors.hpp"
#include "cst/parallel.hpp"

namespace cst {

namespace {
std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

nlohmann::json setup_fingerprints(const ScanGeometry& geometry, const EnergyGrid* grid,
                                  const DensityImage& layout) {
  nlohmann::json f;
  f["geometry"] = hex(geometry.fingerprint());
  if (grid) f["grid"] = hex(grid->fingerprint());
  f["image"] = hex(layout.layout_fingerprint());
  return f;
}

void check_fingerprints(const nlohmann::json& a, const nlohmann::json& b, const char* what) {
  for (const auto& [key, value] : a.items()) {
    if (b.contains(key) && b.at(key) != value) {
      throw FingerprintMismatch(std::string(what) + ": " + key + " fingerprint differs");
    }
  }
}

SparseOperator assemble_xray(const ScanGeometry& geometry, std::size_t n, double fov,
                             double step_fraction) {
  geometry.validate();
  const DensityImage layout(n, fov);
  const double scale = geometry.physical_scale;
  const double step = step_fraction * layout.pixel_size();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(geometry.n_pairs());
  parallel_for(geometry.n_pairs(), [&](std::size_t p) {
    const std::size_t i = p / geometry.n_detectors_per_source;
    const std::size_t j = p % geometry.n_detectors_per_source;
    const Point a = geometry.source(i) * scale;
    const Vec2 seg = (geometry.detector(i, j) - geometry.source(i)) * scale;
    const double len = seg.norm();
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    const double dt = 1.0 / static_cast<double>(count);
    const double ds = len * dt;
    for (std::size_t k = 0; k < count; ++k) {
      const auto idx = layout.index_of(a + seg * ((static_cast<double>(k) + 0.5) * dt));
      if (idx >= 0) rows[p].emplace_back(static_cast<std::uint32_t>(idx), ds);
    }
  });
  SparseOperator op = SparseOperator::from_rows(layout.size(), std::move(rows));
  op.metadata["kind"] = "xray";
  op.metadata["units"] = "cm";
  op.metadata["step_fraction"] = step_fraction;
  op.metadata["fingerprints"] = setup_fingerprints(geometry, nullptr, layout);
  return op;
}

SparseOperator assemble_l1(const DensityImage& prior_in, const ScanGeometry& geometry,
                           const EnergyGrid& grid, double E0, const AssemblyOptions& options) {
  for (double v : prior_in.values) {
    if (v < 0.0) throw DomainError("prior density must be nonnegative");
  }
  const DensityImage prior =
      options.prior_blur_px > 0.0 ? gaussian_blur(prior_in, options.prior_blur_px) : prior_in;
  const FirstOrderKernel kernel(prior, geometry, grid, E0, options.first);
  const std::size_t nb = grid.n_bins();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(geometry.n_pairs() * nb);
  parallel_for(geometry.n_pairs(), [&](std::size_t p) {
    for (const auto& e : kernel.pair_entries(p)) rows[p * nb + e.bin].emplace_back(e.pixel, e.weight);
  });
  SparseOperator op = SparseOperator::from_rows(prior.size(), std::move(rows));
  op.metadata["kind"] = "first-order";
  op.metadata["E0_MeV"] = nlohmann::json::array({E0});
  op.metadata["intensity"] = options.first.intensity;
  op.metadata["subsampling"] = options.first.subsampling;
  op.metadata["prior_blur_px"] = options.prior_blur_px;
  op.metadata["fingerprints"] = setup_fingerprints(geometry, &grid, prior);
  return op;
}

SparseOperator assemble_l1_poly(const DensityImage& prior, const ScanGeometry& geometry,
                                const EnergyGrid& grid, const PolySource& source,
                                const AssemblyOptions& options) {
  source.validate(grid.resolution());
  for (const auto& lvl : source.levels) {
    if (lvl.energy < grid.lo()) {
      throw ConfigError("source line below the energy grid");
    }
  }
  AssemblyOptions per_level = options;
  per_level.first.intensity = options.first.intensity * source.total_intensity;
  SparseOperator total(geometry.n_pairs() * grid.n_bins(), prior.size());
  for (const auto& lvl : source.levels) {
    total.add_scaled(assemble_l1(prior, geometry, grid, lvl.energy, per_level), lvl.weight);
  }
  total.metadata["kind"] = "first-order";
  total.metadata["E0_MeV"] = nlohmann::json::array();
  total.metadata["weights"] = nlohmann::json::array();
  for (const auto& lvl : source.levels) {
    total.metadata["E0_MeV"].push_back(lvl.energy);
    total.metadata["weights"].push_back(lvl.weight);
  }
  total.metadata["intensity"] = per_level.first.intensity;
  total.metadata["subsampling"] = options.first.subsampling;
  total.metadata["prior_blur_px"] = options.prior_blur_px;
  total.metadata["fingerprints"] = setup_fingerprints(geometry, &grid, prior);
  return total;
}

}  // namespace cst
