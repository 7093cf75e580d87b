#include "cst/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cst/errors.hpp"
#include "cst/io.hpp"

namespace cst {

using nlohmann::json;

Variant parse_variant(const std::string& name) {
  if (name == "g1-only") return Variant::G1Only;
  if (name == "full-spectrum") return Variant::FullSpectrum;
  if (name == "full-spectrum+derivative") return Variant::FullSpectrumDerivative;
  throw ConfigError("unknown variant '" + name +
                    "' (expected g1-only, full-spectrum or full-spectrum+derivative)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::G1Only: return "g1-only";
    case Variant::FullSpectrum: return "full-spectrum";
    case Variant::FullSpectrumDerivative: return "full-spectrum+derivative";
  }
  return "full-spectrum";
}

namespace {

/// Object accessor that rejects keys it was not asked about.
class Block {
 public:
  Block(const json& parent, const char* name) : name_(name) {
    if (parent.contains(name)) {
      if (!parent.at(name).is_object()) throw ConfigError(std::string("config block '") + name + "' must be an object");
      j_ = parent.at(name);
    } else {
      j_ = json::object();
    }
  }
  template <class T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + name_ + "." + key + "' has the wrong type");
    }
  }
  [[nodiscard]] const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  json j_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> blocks{"geometry", "phantom", "source", "forward",
                                            "noise", "recon", "ct"};
  for (const auto& [key, value] : j.items()) {
    if (!blocks.contains(key)) throw ConfigError("unknown config block '" + key + "'");
  }
  PipelineConfig c;
  {
    Block b(j, "geometry");
    b.read("n_sources", c.n_sources);
    b.read("n_detectors", c.n_detectors);
    b.read("n_bins", c.n_bins);
    b.read("energy_lo", c.energy_lo);
    b.read("energy_hi", c.energy_hi);
    b.read("support_radius", c.support_radius);
    b.finish();
  }
  {
    Block b(j, "phantom");
    b.read("kind", c.phantom);
    b.read("file", c.phantom_file);
    b.read("metal", c.metal);
    b.read("size", c.image_size);
    b.finish();
  }
  {
    Block b(j, "source");
    b.read("intensity", c.source.total_intensity);
    if (b.has("levels")) {
      c.source.levels.clear();
      for (const auto& l : b.raw("levels")) {
        if (!l.is_array() || l.size() != 2) throw ConfigError("source levels are [energy, weight] pairs");
        c.source.levels.push_back({l[0].get<double>(), l[1].get<double>()});
      }
    }
    b.finish();
  }
  {
    Block b(j, "forward");
    b.read("subsampling", c.subsampling);
    b.read("n_omega1", c.n_omega1);
    b.read("eps_r", c.eps_r);
    b.read("first_site_downsample", c.first_site_downsample);
    b.read("second_order", c.second_order);
    b.read("lambda_subnodes", c.lambda_subnodes);
    b.read("max_refine_depth", c.max_refine_depth);
    b.finish();
  }
  {
    Block b(j, "noise");
    b.read("enabled", c.noise);
    b.read("photons_per_source", c.photons_per_source);
    b.read("seed", c.seed);
    b.finish();
  }
  {
    Block b(j, "recon");
    std::string variant = to_string(c.variant);
    b.read("variant", variant);
    c.variant = parse_variant(variant);
    if (b.has("lambda") && b.raw("lambda").is_object()) {
      for (const auto& [name, value] : b.raw("lambda").items()) {
        if (!value.is_number()) throw ConfigError("recon.lambda." + name + " must be a number");
        c.lambda_by_variant[parse_variant(name)] = value.get<double>();
      }
    } else {
      b.read("lambda", c.tv.lambda);
    }
    b.read("beta", c.tv.beta);
    b.read("gamma", c.gamma);
    b.read("max_iters", c.max_iters);
    b.read("grad_tol", c.grad_tol);
    b.read("prior_blur_px", c.prior_blur_px);
    b.read("init_from_prior", c.init_from_prior);
    b.finish();
  }
  {
    Block b(j, "ct");
    b.read("lambda", c.ct_tv.lambda);
    b.read("beta", c.ct_tv.beta);
    b.read("max_iters", c.ct_max_iters);
    b.finish();
  }
  if (c.image_size < 16) throw ConfigError("phantom.size must be at least 16");
  if (c.phantom == "file" && c.phantom_file.empty()) throw ConfigError("phantom.file is required for kind 'file'");
  c.source.validate(make_grid(c).resolution());
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json j;
  j["geometry"] = {{"n_sources", n_sources},   {"n_detectors", n_detectors},
                   {"n_bins", n_bins},         {"energy_lo", energy_lo},
                   {"energy_hi", energy_hi},   {"support_radius", support_radius}};
  j["phantom"] = {{"kind", phantom}, {"file", phantom_file}, {"metal", metal}, {"size", image_size}};
  json levels = json::array();
  for (const auto& l : source.levels) levels.push_back({l.energy, l.weight});
  j["source"] = {{"levels", levels}, {"intensity", source.total_intensity}};
  j["forward"] = {{"subsampling", subsampling},
                  {"n_omega1", n_omega1},
                  {"eps_r", eps_r},
                  {"first_site_downsample", first_site_downsample},
                  {"second_order", second_order},
                  {"lambda_subnodes", lambda_subnodes},
                  {"max_refine_depth", max_refine_depth}};
  j["noise"] = {{"enabled", noise}, {"photons_per_source", photons_per_source}, {"seed", seed}};
  json lambda = tv.lambda;
  if (!lambda_by_variant.empty()) {
    lambda = json::object();
    for (const auto& [v, l] : lambda_by_variant) lambda[to_string(v)] = l;
  }
  j["recon"] = {{"variant", to_string(variant)}, {"lambda", lambda}, {"beta", tv.beta},
                {"gamma", gamma},                 {"max_iters", max_iters},
                {"grad_tol", grad_tol},           {"prior_blur_px", prior_blur_px},
                {"init_from_prior", init_from_prior}};
  j["ct"] = {{"lambda", ct_tv.lambda}, {"beta", ct_tv.beta}, {"max_iters", ct_max_iters}};
  return j;
}

double phantom_fov(const PipelineConfig& cfg) {
  if (cfg.phantom == "thorax" || cfg.phantom == "two-disk") return 35.0;
  if (cfg.phantom == "ring") return 7.1;
  if (cfg.phantom == "file") return load_phantom_spec(cfg.phantom_file).fov;
  throw ConfigError("unknown phantom kind '" + cfg.phantom + "'");
}

ScanGeometry make_geometry(const PipelineConfig& cfg) {
  return ScanGeometry::make(cfg.n_sources, cfg.n_detectors, 0.5 * phantom_fov(cfg), cfg.support_radius);
}

EnergyGrid make_grid(const PipelineConfig& cfg) {
  return EnergyGrid::uniform(cfg.energy_lo, cfg.energy_hi, cfg.n_bins);
}

DensityImage make_phantom(const PipelineConfig& cfg) {
  if (cfg.phantom == "thorax") return thorax_phantom(cfg.image_size);
  if (cfg.phantom == "ring") return ring_phantom(cfg.image_size, parse_metal(cfg.metal));
  if (cfg.phantom == "two-disk") return two_disk_phantom(cfg.image_size);
  if (cfg.phantom == "file") return rasterize(load_phantom_spec(cfg.phantom_file), cfg.image_size);
  throw ConfigError("unknown phantom kind '" + cfg.phantom + "'");
}

SimulatedData simulate(const PipelineConfig& cfg, const DensityImage& truth) {
  const ScanGeometry geometry = make_geometry(cfg);
  const EnergyGrid grid = make_grid(cfg);
  PolyOptions opts;
  opts.first.subsampling = cfg.subsampling;
  opts.second.n_omega1 = cfg.n_omega1;
  opts.second.eps_r = cfg.eps_r;
  opts.second.first_site_downsample = cfg.first_site_downsample;
  opts.second.lambda_subnodes = cfg.lambda_subnodes;
  opts.second.max_refine_depth = cfg.max_refine_depth;

  SimulatedData out;
  out.g1 = forward_poly(truth, geometry, grid, cfg.source, 1, opts);
  const json fp = setup_fingerprints(geometry, &grid, truth);
  out.g1.metadata["fingerprints"] = fp;
  out.measured = out.g1;
  if (cfg.second_order) {
    Spectrum g2(geometry.n_sources, geometry.n_detectors_per_source, grid);
    SecondOrderOptions so = opts.second;
    so.intensity = cfg.source.total_intensity;
    for (const auto& lvl : cfg.source.levels) {
      const Spectrum part = forward_t2(truth, geometry, grid, lvl.energy, so);
      for (std::size_t q = 0; q < g2.counts.size(); ++q) g2.counts[q] += lvl.weight * part.counts[q];
      g2.metadata = part.metadata;
    }
    g2.metadata["intensity"] = cfg.source.total_intensity;
    g2.metadata["fingerprints"] = fp;
    for (std::size_t q = 0; q < g2.counts.size(); ++q) out.measured.counts[q] += g2.counts[q];
    out.measured.metadata["order"] = 2;
    out.measured.metadata["n_omega1"] = cfg.n_omega1;
    out.measured.metadata["eps_r"] = cfg.eps_r;
    out.measured.metadata["first_site_downsample"] = cfg.first_site_downsample;
    out.g2 = std::move(g2);
  }
  if (cfg.noise) out.measured = add_poisson_noise(out.measured, cfg.photons_per_source, cfg.seed);
  return out;
}

SolveResult reconstruct_ct(const PipelineConfig& cfg, const Spectrum& spectrum) {
  if (!spectrum.has_ballistic()) throw MissingBallistic("spectrum has no ballistic channel");
  const ScanGeometry geometry = make_geometry(cfg);
  const double fov = phantom_fov(cfg);
  const std::size_t n = cfg.image_size;
  if (spectrum.n_levels != cfg.source.levels.size()) {
    throw ConfigError("ballistic channel has a different number of source levels than the config");
  }
  if (spectrum.n_pairs() != geometry.n_pairs()) throw ShapeMismatch("spectrum does not match the geometry");
  const SparseOperator X = assemble_xray(geometry, n, fov);
  const double intensity = spectrum.metadata.value("intensity", cfg.source.total_intensity);

  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
  std::vector<double> data;
  for (std::size_t k = 0; k < cfg.source.levels.size(); ++k) {
    const auto& lvl = cfg.source.levels[k];
    const double mu = mu_water(lvl.energy);
    const double i0 = lvl.weight * intensity;
    for (std::size_t p = 0; p < geometry.n_pairs(); ++p) {
      const double b = std::max(spectrum.ballistic_at(k, p), 1e-12 * i0);
      data.push_back(-std::log(b / i0));
      auto& row = rows.emplace_back();
      for (std::uint64_t q = X.row_ptr()[p]; q < X.row_ptr()[p + 1]; ++q) {
        row.emplace_back(X.col_idx()[q], mu * X.values()[q]);
      }
    }
  }
  const SparseOperator A = SparseOperator::from_rows(n * n, std::move(rows));
  double peak = 0.0;
  for (double v : data) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  for (double& v : data) v *= scale;
  const ScaledMap scaled(A, scale);
  ReconProblem pr;
  pr.op = &scaled;
  pr.data = std::move(data);
  pr.image_side = n;
  pr.tv = cfg.ct_tv;
  pr.max_iters = cfg.ct_max_iters;
  pr.grad_tol = cfg.grad_tol;
  return fletcher_reeves(pr);
}

SparseOperator assemble_operator(const PipelineConfig& cfg, const DensityImage& prior) {
  AssemblyOptions opts;
  opts.first.subsampling = cfg.subsampling;
  opts.prior_blur_px = cfg.prior_blur_px;
  DensityImage clamped = prior;
  for (double& v : clamped.values) v = std::max(v, 0.0);
  return assemble_l1_poly(clamped, make_geometry(cfg), make_grid(cfg), cfg.source, opts);
}

PreparedProblem prepare_cst_problem(const PipelineConfig& cfg, const SparseOperator& op,
                                    const Spectrum& spectrum, Variant variant,
                                    const std::vector<double>& initial) {
  if (op.metadata.contains("fingerprints") && spectrum.metadata.contains("fingerprints")) {
    check_fingerprints(op.metadata.at("fingerprints"), spectrum.metadata.at("fingerprints"),
                       "operator vs spectrum");
  }
  if (op.rows() != spectrum.counts.size()) throw ShapeMismatch("operator rows do not match spectrum size");
  PreparedProblem out;
  std::vector<double> data;
  const LinearMap* base = &op;
  if (variant == Variant::FullSpectrumDerivative) {
    DerivativeConfig dc{cfg.gamma, BoundaryRule::EvenReflection};
    data = apply_D_to_spectrum(spectrum, dc);
    out.composed = std::make_unique<DerivativeComposedMap>(op, spectrum.grid, dc);
    base = out.composed.get();
  } else {
    data = spectrum.counts;
  }
  double peak = 0.0;
  for (double v : data) peak = std::max(peak, std::abs(v));
  out.data_scale = peak > 0.0 ? 1.0 / peak : 1.0;
  for (double& v : data) v *= out.data_scale;
  out.scaled = std::make_unique<ScaledMap>(*base, out.data_scale);
  out.problem.op = out.scaled.get();
  out.problem.data = std::move(data);
  out.problem.image_side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(op.cols()))));
  out.problem.tv = cfg.tv_for(variant);
  out.problem.initial = initial;
  out.problem.max_iters = cfg.max_iters;
  out.problem.grad_tol = cfg.grad_tol;
  return out;
}

SolveResult reconstruct_cst(const PipelineConfig& cfg, const SparseOperator& op,
                            const Spectrum& spectrum, Variant variant,
                            const std::vector<double>& initial) {
  const PreparedProblem prep = prepare_cst_problem(cfg, op, spectrum, variant, initial);
  return fletcher_reeves(prep.problem);
}

Metrics compute_metrics(const DensityImage& image, const DensityImage& reference) {
  if (image.size() != reference.size()) throw ShapeMismatch("metrics: image sizes differ");
  double err2 = 0.0;
  double ref2 = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double e = image.values[i] - reference.values[i];
    err2 += e * e;
    ref2 += reference.values[i] * reference.values[i];
    peak = std::max(peak, std::abs(reference.values[i]));
  }
  Metrics m;
  m.relative_rmse = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
  const double mse = err2 / static_cast<double>(image.size());
  m.psnr_db = mse > 0.0 ? 10.0 * std::log10(peak * peak / mse) : std::numeric_limits<double>::infinity();
  return m;
}

double relative_noise(const Spectrum& noisy, const Spectrum& clean) {
  noisy.check_compatible(clean);
  double e2 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < clean.counts.size(); ++i) {
    const double e = noisy.counts[i] - clean.counts[i];
    e2 += e * e;
    s2 += clean.counts[i] * clean.counts[i];
  }
  return std::sqrt(e2 / s2);
}

double expected_relative_noise(const Spectrum& clean, double photons_per_source) {
  const double factor = photons_per_source / clean.metadata.value("intensity", 1.0);
  double sum = 0.0;
  double s2 = 0.0;
  for (double c : clean.counts) {
    sum += c;
    s2 += c * c;
  }
  return std::sqrt(sum / factor) / std::sqrt(s2);
}

}  // namespace cst
