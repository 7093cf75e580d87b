#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cst/assembly.hpp"
#include "cst/forward.hpp"
#include "cst/phantom.hpp"
#include "cst/solver.hpp"
#include "cst/spectral.hpp"

namespace cst {

enum class Variant { G1Only, FullSpectrum, FullSpectrumDerivative };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

struct PipelineConfig {
  // geometry
  std::size_t n_sources = 8;
  std::size_t n_detectors = 16;
  std::size_t n_bins = 64;
  double energy_lo = 0.355;
  double energy_hi = 1.173;
  double support_radius = 0.95;

  // phantom
  std::string phantom = "thorax";  // thorax | ring | two-disk | file
  std::string phantom_file;
  std::string metal = "aluminium";
  std::size_t image_size = 64;

  // source
  PolySource source = PolySource::mono(1.173);

  // forward model
  std::size_t subsampling = 2;
  std::size_t n_omega1 = 64;
  double eps_r = 1e-3;
  std::size_t first_site_downsample = 2;
  bool second_order = true;
  std::size_t lambda_subnodes = 1;
  std::size_t max_refine_depth = 12;

  // noise
  bool noise = true;
  double photons_per_source = 5e7;
  std::uint64_t seed = 1;

  // reconstruction
  Variant variant = Variant::FullSpectrumDerivative;
  TVParams tv{1e-3, 1e-6};
  std::map<Variant, double> lambda_by_variant;  // overrides tv.lambda per variant
  double gamma = -1.0;  // MeV, negative selects three bin widths
  std::size_t max_iters = 2000;
  double grad_tol = 1e-9;
  TVParams ct_tv{1e-5, 1e-6};
  std::size_t ct_max_iters = 2000;
  double prior_blur_px = 0.0;
  bool init_from_prior = true;

  [[nodiscard]] TVParams tv_for(Variant v) const {
    TVParams t = tv;
    if (const auto it = lambda_by_variant.find(v); it != lambda_by_variant.end()) t.lambda = it->second;
    return t;
  }

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  [[nodiscard]] nlohmann::json to_json() const;
};

double phantom_fov(const PipelineConfig& cfg);
ScanGeometry make_geometry(const PipelineConfig& cfg);
EnergyGrid make_grid(const PipelineConfig& cfg);
DensityImage make_phantom(const PipelineConfig& cfg);

struct SimulatedData {
  Spectrum g1;        // first-order counts, ballistic channel attached
  Spectrum measured;  // g1 (+ g2) (+ noise), ballistic channel attached
  std::optional<Spectrum> g2;
};

/// Ballistic, first-order and (optionally) second-order spectra plus noise.
SimulatedData simulate(const PipelineConfig& cfg, const DensityImage& truth);

/// Sparse-view CT prior from the ballistic channel alone.
SolveResult reconstruct_ct(const PipelineConfig& cfg, const Spectrum& spectrum);

/// Linearized first-order operator from the prior.
SparseOperator assemble_operator(const PipelineConfig& cfg, const DensityImage& prior);

/// Solves one of the three scatter reconstruction problems. The data is
/// rescaled so its largest magnitude is one, and the operator with it.
SolveResult reconstruct_cst(const PipelineConfig& cfg, const SparseOperator& op,
                            const Spectrum& spectrum, Variant variant,
                            const std::vector<double>& initial);

/// Operator and data for a reconstruction problem, with scaling applied.
struct PreparedProblem {
  std::unique_ptr<LinearMap> composed;
  std::unique_ptr<LinearMap> scaled;
  ReconProblem problem;
  double data_scale = 1.0;
};

PreparedProblem prepare_cst_problem(const PipelineConfig& cfg, const SparseOperator& op,
                                    const Spectrum& spectrum, Variant variant,
                                    const std::vector<double>& initial);

struct Metrics {
  double relative_rmse = 0.0;
  double psnr_db = 0.0;
};

Metrics compute_metrics(const DensityImage& image, const DensityImage& reference);

/// Relative noise ||noisy - clean|| / ||clean|| over the scatter counts.
double relative_noise(const Spectrum& noisy, const Spectrum& clean);

/// Expected relative noise sqrt(sum counts / factor) / ||counts|| for a
/// Poisson draw at the given photon budget (no sampling involved).
double expected_relative_noise(const Spectrum& clean, double photons_per_source);

}  // namespace cst
