#include "cst/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "cst/errors.hpp"
#include "cst/parallel.hpp"

namespace cst {

namespace {

constexpr double kPi = std::numbers::pi;

double re2() {
  return kPhysics.classical_electron_radius * kPhysics.classical_electron_radius;
}

/// Values sampled at pixel centres with bilinear interpolation in between.
struct CenterMap {
  std::size_t n = 0;
  double fov = 0.0;
  double h = 0.0;
  std::vector<double> v;

  explicit CenterMap(const DensityImage& like)
      : n(like.n), fov(like.fov), h(like.pixel_size()), v(like.size(), 0.0) {}

  [[nodiscard]] double at(Point p) const {
    const double last = static_cast<double>(n - 1);
    const double fc = std::clamp((p.x + 0.5 * fov) / h - 0.5, 0.0, last);
    const double fr = std::clamp((0.5 * fov - p.y) / h - 0.5, 0.0, last);
    const auto c0 = std::min(static_cast<std::size_t>(fc), n - 1);
    const auto r0 = std::min(static_cast<std::size_t>(fr), n - 1);
    const std::size_t c1 = std::min(c0 + 1, n - 1);
    const std::size_t r1 = std::min(r0 + 1, n - 1);
    const double tc = fc - static_cast<double>(c0);
    const double tr = fr - static_cast<double>(r0);
    const double top = v[r0 * n + c0] * (1.0 - tc) + v[r0 * n + c1] * tc;
    const double bot = v[r1 * n + c0] * (1.0 - tc) + v[r1 * n + c1] * tc;
    return top * (1.0 - tr) + bot * tr;
  }
};

/// Fills `map` with line integrals from `from` (geometry units) to every
/// pixel centre within `radius_cm` (plus a two-pixel rim for interpolation).
void fill_line_integral_map(CenterMap& map, const DensityImage& density, Point from,
                            double scale, double step_fraction, double radius_cm) {
  const double reach = radius_cm + 2.0 * density.pixel_size() * std::numbers::sqrt2;
  const double reach2 = reach * reach;
  for (std::size_t i = 0; i < density.size(); ++i) {
    const Point c = density.center(i);
    map.v[i] = c.norm2() <= reach2 ? ray_integral(density, from, c / scale, scale, step_fraction)
                                   : 0.0;
  }
}

nlohmann::json base_metadata(const char* kind, double E0, double intensity) {
  nlohmann::json m;
  m["kind"] = kind;
  m["E0_MeV"] = E0;
  m["intensity"] = intensity;
  m["convention"] = "bin-integrated counts";
  m["constants"] = {{"electron_rest_energy_MeV", kPhysics.electron_rest_energy},
                    {"classical_electron_radius_cm", kPhysics.classical_electron_radius},
                    {"n_e_water_per_cm3", kPhysics.n_e_water}};
  return m;
}

}  // namespace

double ray_integral(const DensityImage& density, Point a, Point b, double physical_scale,
                    double step_fraction) {
  const Point a_cm = a * physical_scale;
  const Vec2 seg = (b - a) * physical_scale;
  const double len = seg.norm();
  if (len == 0.0) return 0.0;
  const double step = step_fraction * density.pixel_size();
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
  const double dt = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    sum += density.lookup(a_cm + seg * ((static_cast<double>(k) + 0.5) * dt));
  }
  return sum * len * dt;
}

double attenuation_factor(const AttenuationContext& ctx, Point a, Point b) {
  const double dist = (b - a).norm() * ctx.physical_scale;
  if (dist == 0.0) throw DomainError("attenuation_factor: coincident points");
  const double L = ray_integral(ctx.density, a, b, ctx.physical_scale, ctx.step_fraction);
  return std::exp(-mu_water(ctx.energy) * L) / (dist * dist);
}

std::vector<double> projection_lengths(const DensityImage& density, const ScanGeometry& geometry,
                                       double step_fraction) {
  std::vector<double> out(geometry.n_pairs());
  parallel_for(geometry.n_pairs(), [&](std::size_t p) {
    const std::size_t i = p / geometry.n_detectors_per_source;
    const std::size_t j = p % geometry.n_detectors_per_source;
    out[p] = ray_integral(density, geometry.source(i), geometry.detector(i, j),
                          geometry.physical_scale, step_fraction);
  });
  return out;
}

std::vector<double> xray_transform(const DensityImage& density, const ScanGeometry& geometry,
                                   double E0, double intensity, double step_fraction) {
  auto L = projection_lengths(density, geometry, step_fraction);
  const double mu = mu_water(E0);
  for (double& v : L) v = intensity * std::exp(-mu * v);
  return L;
}

std::vector<std::size_t> support_pixels(const DensityImage& image, const ScanGeometry& geometry) {
  const double r = geometry.support_radius * geometry.physical_scale;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (image.center(i).norm2() <= r * r) out.push_back(i);
  }
  return out;
}

FirstOrderKernel::FirstOrderKernel(const DensityImage& attenuation_density,
                                   const ScanGeometry& geometry, const EnergyGrid& grid,
                                   double E0, const FirstOrderOptions& options)
    : density_(attenuation_density), geometry_(geometry), grid_(grid), E0_(E0),
      options_(options), n_pixels_(attenuation_density.size()) {
  if (options.subsampling == 0) throw ConfigError("subsampling must be at least 1");
  geometry.validate();
  grid.validate();
  const std::size_t k = options.subsampling;
  const double h = density_.pixel_size();
  const double sub = h / static_cast<double>(k);
  sub_area_ = sub * sub;
  const double scale = geometry.physical_scale;
  for (std::size_t pix : support_pixels(density_, geometry)) {
    const Point c = density_.center(pix);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const Point p{c.x - 0.5 * h + (static_cast<double>(b) + 0.5) * sub,
                      c.y + 0.5 * h - (static_cast<double>(a) + 0.5) * sub};
        points_.push_back({p / scale, static_cast<std::uint32_t>(pix)});
      }
    }
  }
  const double mu0 = mu_water(E0);
  const std::size_t np = points_.size();
  source_factor_.assign(geometry.n_sources * np, 0.0);
  parallel_for(geometry.n_sources, [&](std::size_t i) {
    const Point s = geometry.source(i);
    for (std::size_t q = 0; q < np; ++q) {
      const Point x = points_[q].x;
      const double dist = (x - s).norm() * scale;
      const double L = ray_integral(density_, s, x, scale, options_.step_fraction);
      source_factor_[i * np + q] = std::exp(-mu0 * L) / (dist * dist);
    }
  });
}

std::vector<FirstOrderKernel::Entry> FirstOrderKernel::pair_entries(std::size_t pair) const {
  const std::size_t i = pair / geometry_.n_detectors_per_source;
  const std::size_t j = pair % geometry_.n_detectors_per_source;
  const Point s = geometry_.source(i);
  const Point d = geometry_.detector(i, j);
  const double scale = geometry_.physical_scale;
  const double constant = options_.intensity * re2() * kPhysics.n_e_water * sub_area_;
  const std::size_t np = points_.size();
  std::vector<Entry> out;
  out.reserve(np);
  for (std::size_t q = 0; q < np; ++q) {
    const Point x = points_[q].x;
    const double omega = scatter_angle(x, s, d);
    const double E = compton_energy(E0_, omega);
    const std::ptrdiff_t bin = grid_.bin_of(E);
    if (bin < 0) continue;
    const double dist = (d - x).norm() * scale;
    const double L = ray_integral(density_, x, d, scale, options_.step_fraction);
    const double a1 = std::exp(-mu_water(E) * L) / (dist * dist);
    const double w = constant * klein_nishina_P(omega, E0_) * source_factor_[i * np + q] * a1;
    out.push_back({points_[q].pixel, static_cast<std::uint32_t>(bin), w});
  }
  return out;
}

Spectrum forward_t1(const DensityImage& density, const ScanGeometry& geometry,
                    const EnergyGrid& grid, double E0, const FirstOrderOptions& options,
                    const DensityImage* attenuation_density) {
  const DensityImage& att = attenuation_density ? *attenuation_density : density;
  if (att.n != density.n || att.fov != density.fov) {
    throw ShapeMismatch("attenuation image layout differs from the density image");
  }
  Spectrum out(geometry.n_sources, geometry.n_detectors_per_source, grid);
  out.metadata = base_metadata("first-order", E0, options.intensity);
  out.metadata["subsampling"] = options.subsampling;
  out.metadata["frozen_attenuation"] = attenuation_density != nullptr;
  if (density.is_zero() && att.is_zero()) return out;
  const FirstOrderKernel kernel(att, geometry, grid, E0, options);
  parallel_for(geometry.n_pairs(), [&](std::size_t p) {
    auto row = out.row(p);
    for (const auto& e : kernel.pair_entries(p)) row[e.bin] += e.weight * density.values[e.pixel];
  });
  return out;
}

Spectrum forward_t2(const DensityImage& density, const ScanGeometry& geometry,
                    const EnergyGrid& grid, double E0, const SecondOrderOptions& options) {
  if (options.n_omega1 < 64 || options.n_omega1 % 2 != 0) {
    throw ConfigError("second-order quadrature needs an even number of at least 64 nodes");
  }
  if (options.lambda_subnodes == 0) throw ConfigError("lambda_subnodes must be at least 1");
  const std::size_t ds = options.first_site_downsample;
  if (ds == 0 || density.n % ds != 0) {
    throw ConfigError("first-site downsampling must divide the image size");
  }
  geometry.validate();
  grid.validate();
  Spectrum out(geometry.n_sources, geometry.n_detectors_per_source, grid);
  out.metadata = base_metadata("second-order", E0, options.intensity);
  out.metadata["n_omega1"] = options.n_omega1;
  out.metadata["eps_r"] = options.eps_r;
  out.metadata["first_site_downsample"] = ds;
  out.metadata["lambda_subnodes"] = options.lambda_subnodes;
  out.metadata["max_refine_depth"] = options.max_refine_depth;
  if (density.is_zero()) return out;

  const double scale = geometry.physical_scale;
  const double support_cm = geometry.support_radius * scale;
  const double sr2 = geometry.support_radius * geometry.support_radius;
  const std::size_t nb = grid.n_bins();
  const std::size_t n_pairs = geometry.n_pairs();
  const double nw = kPhysics.n_e_water;

  // Energy sub-nodes that two scatters can reach; each bin is split into
  // equal energy slices and every slice carries its own lambda width.
  struct BinData {
    std::size_t bin;
    double lambda, E, mu, dlambda;
  };
  const std::size_t m_sub = options.lambda_subnodes;
  std::vector<BinData> bins;
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t q = 0; q < m_sub; ++q) {
      const double w = grid.width(b) / static_cast<double>(m_sub);
      const double e_lo = grid.edges[b] + static_cast<double>(q) * w;
      const double E = e_lo + 0.5 * w;
      const double lam = lambda_unchecked(E0, E);
      if (!(lam > 0.0 && lam < 2.0)) continue;
      const double dlam = kPhysics.electron_rest_energy * (1.0 / e_lo - 1.0 / (e_lo + w));
      bins.push_back({b, lam, E, mu_water(E), dlam});
    }
  }
  // Signed midpoint nodes on [-pi, -delta] u [delta, pi].
  struct Node {
    double omega, cos1, sin1, E1, P1, mu1;
  };
  auto make_node = [&](double omega) {
    const double w = std::abs(omega);
    const double E1 = compton_energy(E0, w);
    return Node{omega, std::cos(w), std::sin(omega), E1, klein_nishina_P(w, E0), mu_water(E1)};
  };
  const std::size_t half = options.n_omega1 / 2;
  const double domega = (kPi - options.delta) / static_cast<double>(half);
  std::vector<Node> nodes;
  for (double sign : {-1.0, 1.0}) {
    for (std::size_t k = 0; k < half; ++k) {
      nodes.push_back(make_node(sign * (options.delta + (static_cast<double>(k) + 0.5) * domega)));
    }
  }
  // Both edges of every node's cell.
  std::vector<Node> lo_edge, hi_edge;
  for (const Node& nd : nodes) {
    lo_edge.push_back(make_node(nd.omega - 0.5 * domega));
    hi_edge.push_back(make_node(nd.omega + 0.5 * domega));
  }
  // A cell whose second site moves more than half a pixel is split so that
  // the piecewise-constant density along the curve is not aliased.
  const double refine_step = 0.5 * density.pixel_size() / scale;
  const std::size_t max_depth = options.max_refine_depth;

  // First sites: pixel (or block) centres with material inside the support.
  struct Site {
    Point x;  // geometry units
    double n;
    double area;
  };
  std::vector<Site> sites;
  {
    const std::size_t m = density.n / ds;
    const DensityImage coarse_layout(m, density.fov);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        double sum = 0.0;
        for (std::size_t a = 0; a < ds; ++a) {
          for (std::size_t b = 0; b < ds; ++b) sum += density.at(r * ds + a, c * ds + b);
        }
        const double avg = sum / static_cast<double>(ds * ds);
        const Point x = coarse_layout.center(r, c) / scale;
        if (avg > 0.0 && x.norm2() <= sr2) sites.push_back({x, avg, coarse_layout.pixel_area()});
      }
    }
  }

  // Line integrals from every pixel centre to each detector.
  std::vector<CenterMap> to_detector(n_pairs, CenterMap(density));
  parallel_for(n_pairs, [&](std::size_t p) {
    const std::size_t i = p / geometry.n_detectors_per_source;
    const std::size_t j = p % geometry.n_detectors_per_source;
    fill_line_integral_map(to_detector[p], density, geometry.detector(i, j), scale,
                           options.step_fraction, support_cm);
  });

  const double constant = options.intensity * re2() * re2() * nw * nw;
  const std::size_t n_blocks = std::min<std::size_t>(sites.size(), 64);
  std::vector<std::vector<double>> partial(n_blocks);
  parallel_for(n_blocks, [&](std::size_t blk) {
    std::vector<double> acc(n_pairs * nb, 0.0);
    CenterMap from_x(density);
    std::vector<double> source_L(geometry.n_sources);
    const std::size_t lo = blk * sites.size() / n_blocks;
    const std::size_t hi = (blk + 1) * sites.size() / n_blocks;
    for (std::size_t xi = lo; xi < hi; ++xi) {
      const Site& site = sites[xi];
      const Point x = site.x;
      fill_line_integral_map(from_x, density, x, scale, options.step_fraction, support_cm);
      for (std::size_t i = 0; i < geometry.n_sources; ++i) {
        source_L[i] = ray_integral(density, geometry.source(i), x, scale, options.step_fraction);
      }
      for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t i = p / geometry.n_detectors_per_source;
        const std::size_t j = p % geometry.n_detectors_per_source;
        const Point s = geometry.source(i);
        const Point d = geometry.detector(i, j);
        const Vec2 a = x - s;
        const double a_cm = a.norm() * scale;
        const double A0 = std::exp(-mu_water(E0) * source_L[i]) / (a_cm * a_cm);
        const double beta = std::atan2(a.y, a.x);
        const Vec2 dx = d - x;
        const double D = dx.norm();
        const Vec2 v = dx / D;
        const double pair_w = constant * site.n * A0 * site.area;
        double* row = acc.data() + p * nb;

        struct Frame {
          Vec2 u;
          double eta2, S, deta2;
        };
        auto frame_of = [&](const Node& nd) {
          const double ang = beta - nd.omega;
          const Vec2 u{std::cos(ang), std::sin(ang)};
          const double eta2 = v.dot(u);
          return Frame{u, eta2, std::sqrt(std::max(0.0, 1.0 - eta2 * eta2)),
                       v.x * std::sin(ang) - v.y * std::cos(ang)};
        };
        // Second site for one (angle, level) sample, if it is usable.
        struct Hit {
          Point y;
          double r, sin2, cot2;
        };
        auto locate = [&](const Node& nd, const Frame& f, const BinData& bd) -> std::optional<Hit> {
          // Collinear s, x, y: excluded from the two-scatter domain.
          if (std::abs(nd.sin1) < 1e-6 || f.S < 1e-14) return std::nullopt;
          const double c2 = bd.lambda - nd.cos1;
          if (!(c2 > -1.0 && c2 < 1.0)) return std::nullopt;
          const double sin2 = std::sqrt(1.0 - c2 * c2);
          if (sin2 < 1e-9) return std::nullopt;
          const double cot2 = c2 / sin2;
          const double r = D * (f.eta2 - cot2 * f.S);
          if (!(r > options.eps_r)) return std::nullopt;
          const Point y = x + f.u * r;
          if (y.norm2() > sr2) return std::nullopt;
          return Hit{y, r, sin2, cot2};
        };
        // Adds one sample representing an angular cell of width `cell`.
        auto accumulate = [&](const Node& nd, const Frame& f, const BinData& bd, double cell) {
          const auto hit = locate(nd, f, bd);
          if (!hit) return;
          const Point y_cm = hit->y * scale;
          const double ny = density.lookup(y_cm);
          if (ny == 0.0) return;
          const double r = hit->r;
          const double dw2 = -nd.sin1 / hit->sin2;
          const double dr = D * (f.deta2 * (1.0 + hit->cot2 * f.eta2 / f.S) +
                                 dw2 * f.S / (hit->sin2 * hit->sin2));
          const double dl = std::sqrt(r * r + dr * dr) * scale;
          const double r_cm = r * scale;
          const double A1 = std::exp(-nd.mu1 * from_x.at(y_cm)) / (r_cm * r_cm);
          const double yd = (d - hit->y).norm() * scale;
          const double A2 = std::exp(-bd.mu * to_detector[p].at(y_cm)) / (yd * yd);
          const double k = bd.E / nd.E1;
          const double P2 = 0.5 * k * k * (k + 1.0 / k - hit->sin2 * hit->sin2);
          row[bd.bin] += pair_w * ny * nd.P1 * P2 * A1 * A2 * dl * cell * bd.dlambda;
        };

        // Bisects a cell while its ends disagree on validity or its second
        // site sweeps more than the refinement step, then adds the midpoint.
        auto integrate_cell = [&](auto&& self, const Node& lo, const Node& mid, const Node& hi,
                                  const BinData& bd, double cell, std::size_t depth) -> void {
          const Frame fm = frame_of(mid);
          const auto hm = locate(mid, fm, bd);
          const auto hl = locate(lo, frame_of(lo), bd);
          const auto hh = locate(hi, frame_of(hi), bd);
          if (!hm && !hl && !hh) return;
          bool split = !(hm && hl && hh);
          if (!split) split = (hm->y - hl->y).norm() + (hh->y - hm->y).norm() > refine_step;
          if (!split || depth == 0) {
            accumulate(mid, fm, bd, cell);
            return;
          }
          const Node q1 = make_node(mid.omega - 0.25 * cell);
          const Node q3 = make_node(mid.omega + 0.25 * cell);
          self(self, lo, q1, mid, bd, 0.5 * cell, depth - 1);
          self(self, mid, q3, hi, bd, 0.5 * cell, depth - 1);
        };

        for (std::size_t k = 0; k < nodes.size(); ++k) {
          for (const BinData& bd : bins) {
            integrate_cell(integrate_cell, lo_edge[k], nodes[k], hi_edge[k], bd, domega, max_depth);
          }
        }
      }
    }
    partial[blk] = std::move(acc);
  });
  for (const auto& acc : partial) {
    for (std::size_t q = 0; q < acc.size(); ++q) out.counts[q] += acc[q];
  }
  return out;
}

double psi(Point s, Point x, Point y, Point d) {
  const auto [kappa1, rho1] = kappa_rho(y - x, x - s);
  (void)rho1;
  const double p = phi(y - x, d - x);
  return kappa1 + p / std::sqrt(1.0 + p * p);
}

double psi_gradient_norm(Point s, Point x, Point y, Point d) {
  const Vec2 a = (x - s).normalized();
  const Vec2 yx = y - x;
  const Vec2 dy = d - y;
  const double ny = yx.norm();
  const double nd = dy.norm();
  const Vec2 e = yx / ny;
  const Vec2 f = dy / nd;
  const double ea = e.dot(a);
  const double ef = e.dot(f);
  const Vec2 g1 = (a - e * ea) / ny;
  const Vec2 g2 = (f - e * ef) / ny - (e - f * ef) / nd;
  return (g1 + g2).norm();
}

Spectrum forward_t2_oracle(const DensityImage& density, const ScanGeometry& geometry,
                           const EnergyGrid& grid, double E0,
                           const SecondOrderOracleOptions& options) {
  if (options.y_subsampling == 0) throw ConfigError("oracle subsampling must be at least 1");
  geometry.validate();
  grid.validate();
  Spectrum out(geometry.n_sources, geometry.n_detectors_per_source, grid);
  out.metadata = base_metadata("second-order-oracle", E0, options.intensity);
  out.metadata["eps_r"] = options.eps_r;
  out.metadata["y_subsampling"] = options.y_subsampling;

  const double scale = geometry.physical_scale;
  const double sr2 = geometry.support_radius * geometry.support_radius;
  const double h = density.pixel_size();
  const std::size_t k = options.y_subsampling;
  const double sub = h / static_cast<double>(k);

  struct Site {
    Point p;  // geometry units
    double n;
    double area;
  };
  std::vector<Site> xs;
  std::vector<Site> ys;
  for (std::size_t i = 0; i < density.size(); ++i) {
    const double v = density.values[i];
    if (v <= 0.0) continue;
    const Point c = density.center(i);
    if ((c / scale).norm2() <= sr2) xs.push_back({c / scale, v, density.pixel_area()});
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const Point q{c.x - 0.5 * h + (static_cast<double>(b) + 0.5) * sub,
                      c.y + 0.5 * h - (static_cast<double>(a) + 0.5) * sub};
        if ((q / scale).norm2() <= sr2) ys.push_back({q / scale, v, sub * sub});
      }
    }
  }

  const double constant = options.intensity * re2() * re2() * kPhysics.n_e_water * kPhysics.n_e_water;
  const double sf = options.step_fraction;
  parallel_for(geometry.n_pairs(), [&](std::size_t p) {
    const std::size_t i = p / geometry.n_detectors_per_source;
    const std::size_t j = p % geometry.n_detectors_per_source;
    const Point s = geometry.source(i);
    const Point d = geometry.detector(i, j);
    auto row = out.row(p);
    for (const Site& xs_ : xs) {
      const Point x = xs_.p;
      const double sx = (x - s).norm() * scale;
      const double A0 = std::exp(-mu_water(E0) * ray_integral(density, s, x, scale, sf)) / (sx * sx);
      for (const Site& ys_ : ys) {
        const Point y = ys_.p;
        const Vec2 e = y - x;
        const double exy = e.norm();
        if (exy <= options.eps_r) continue;
        const Vec2 a = x - s;
        if (std::abs(e.cross(a)) / (exy * a.norm()) < 1e-6) continue;
        const Vec2 dx = d - x;
        if (std::abs(e.cross(dx)) / (exy * dx.norm()) < 1e-12) continue;
        if ((d - y).norm2() == 0.0) continue;
        const double lam = psi(s, x, y, d);
        if (!(lam > 0.0 && lam < 2.0)) continue;
        const double E = energy_of_lambda(E0, lam);
        const std::ptrdiff_t bin = grid.bin_of(E);
        if (bin < 0) continue;
        const double omega1 = std::acos(kappa_rho(e, a).kappa);
        const double omega2 = std::acos(kappa_rho(d - y, e).kappa);
        const double E1 = compton_energy(E0, omega1);
        const double xy_cm = exy * scale;
        const double yd_cm = (d - y).norm() * scale;
        const double A1 = std::exp(-mu_water(E1) * ray_integral(density, x, y, scale, sf)) / (xy_cm * xy_cm);
        const double A2 = std::exp(-mu_water(E) * ray_integral(density, y, d, scale, sf)) / (yd_cm * yd_cm);
        const double grad = psi_gradient_norm(s, x, y, d) / scale;
        row[static_cast<std::size_t>(bin)] += constant * xs_.n * ys_.n * klein_nishina_P(omega1, E0) *
                                              klein_nishina_P(omega2, E1) * A0 * A1 * A2 * grad *
                                              xs_.area * ys_.area;
      }
    }
  });
  return out;
}

Spectrum forward_poly(const DensityImage& density, const ScanGeometry& geometry,
                      const EnergyGrid& grid, const PolySource& source, int order,
                      const PolyOptions& options) {
  if (order < 0 || order > 2) throw ConfigError("scatter order must be 0, 1 or 2");
  source.validate(grid.resolution());
  Spectrum out(geometry.n_sources, geometry.n_detectors_per_source, grid);
  out.n_levels = source.levels.size();
  out.ballistic.assign(out.n_levels * geometry.n_pairs(), 0.0);
  const auto L = projection_lengths(density, geometry, options.first.step_fraction);
  for (std::size_t k = 0; k < source.levels.size(); ++k) {
    const auto& lvl = source.levels[k];
    const double mu = mu_water(lvl.energy);
    for (std::size_t p = 0; p < L.size(); ++p) {
      out.ballistic_at(k, p) = lvl.weight * source.total_intensity * std::exp(-mu * L[p]);
    }
    if (order >= 1) {
      FirstOrderOptions fo = options.first;
      fo.intensity = source.total_intensity;
      Spectrum g1 = forward_t1(density, geometry, grid, lvl.energy, fo);
      for (std::size_t q = 0; q < out.counts.size(); ++q) out.counts[q] += lvl.weight * g1.counts[q];
    }
    if (order >= 2) {
      SecondOrderOptions so = options.second;
      so.intensity = source.total_intensity;
      Spectrum g2 = forward_t2(density, geometry, grid, lvl.energy, so);
      for (std::size_t q = 0; q < out.counts.size(); ++q) out.counts[q] += lvl.weight * g2.counts[q];
    }
  }
  out.metadata = base_metadata("poly", source.levels.front().energy, source.total_intensity);
  out.metadata["order"] = order;
  out.metadata["levels"] = nlohmann::json::array();
  for (const auto& l : source.levels) {
    out.metadata["levels"].push_back({{"E0_MeV", l.energy}, {"weight", l.weight}});
  }
  out.metadata["subsampling"] = options.first.subsampling;
  if (order >= 2) {
    out.metadata["n_omega1"] = options.second.n_omega1;
    out.metadata["eps_r"] = options.second.eps_r;
    out.metadata["first_site_downsample"] = options.second.first_site_downsample;
  }
  return out;
}

Spectrum add_poisson_noise(const Spectrum& spectrum, double photons_per_source, std::uint64_t seed) {
  if (!(photons_per_source > 0.0)) throw ConfigError("photon budget must be positive");
  const double intensity = spectrum.metadata.value("intensity", 1.0);
  const double factor = photons_per_source / intensity;
  std::mt19937_64 rng(seed);
  auto draw = [&](double mean) {
    if (!(mean > 0.0)) return 0.0;
    std::poisson_distribution<long long> dist(mean * factor);
    return static_cast<double>(dist(rng)) / factor;
  };
  Spectrum out = spectrum;
  for (double& c : out.counts) c = draw(c);
  for (double& c : out.ballistic) c = draw(c);
  out.metadata["noise"] = {{"model", "poisson"}, {"photons_per_source", photons_per_source},
                           {"seed", seed}};
  return out;
}

}  // namespace cst
