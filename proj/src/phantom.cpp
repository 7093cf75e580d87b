#include "cst/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "cst/errors.hpp"

namespace cst {

using nlohmann::json;

bool Shape::contains(Point p) const {
  const Vec2 q = p - center;
  switch (kind) {
    case ShapeKind::Ellipse: {
      const double t = rotation_deg * std::numbers::pi / 180.0;
      const double c = std::cos(t);
      const double s = std::sin(t);
      const double u = c * q.x + s * q.y;
      const double v = -s * q.x + c * q.y;
      return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
    case ShapeKind::Annulus: {
      const double r2 = q.norm2();
      return r2 >= a * a && r2 <= b * b;
    }
    case ShapeKind::Rect: {
      const double t = rotation_deg * std::numbers::pi / 180.0;
      const double c = std::cos(t);
      const double s = std::sin(t);
      const double u = c * q.x + s * q.y;
      const double v = -s * q.x + c * q.y;
      return std::abs(u) <= a && std::abs(v) <= b;
    }
  }
  return false;
}

DensityImage rasterize(const PhantomSpec& spec, std::size_t n) {
  if (n == 0) throw ConfigError("phantom size must be positive");
  if (!(spec.fov > 0.0)) throw ConfigError("phantom field of view must be positive");
  DensityImage img(n, spec.fov);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Point p = img.center(i);
    double v = 0.0;
    for (const Shape& sh : spec.shapes) {
      if (!sh.contains(p)) continue;
      v = spec.mode == CombineMode::Paint ? sh.density : v + sh.density;
    }
    img.values[i] = v;
  }
  return img;
}

namespace {

Shape ellipse(double cx, double cy, double a, double b, double rot, double density) {
  return Shape{ShapeKind::Ellipse, {cx, cy}, a, b, rot, density};
}

}  // namespace

PhantomSpec thorax_spec() {
  PhantomSpec s;
  s.name = "thorax";
  s.fov = 35.0;
  s.mode = CombineMode::Paint;
  s.shapes = {
      ellipse(0.0, 0.0, 14.2, 10.65, 0.0, 0.907),   // body
      ellipse(-6.5, 0.5, 4.5, 7.0, 10.0, 0.380),    // right lung
      ellipse(6.5, 0.5, 4.5, 7.0, -10.0, 0.380),    // left lung
      ellipse(1.5, 1.5, 3.8, 3.2, 30.0, 1.190),     // heart
      ellipse(0.0, -6.0, 1.8, 1.5, 0.0, 1.300),
      ellipse(-1.0, -2.5, 1.2, 1.0, 0.0, 1.116),
      ellipse(0.0, -8.2, 1.4, 1.2, 0.0, 1.784),     // spine
      ellipse(-1.8, -4.2, 1.0, 1.0, 0.0, 1.077),    // aorta
      ellipse(0.0, 9.2, 1.5, 0.6, 0.0, 1.784),      // sternum
  };
  return s;
}

PhantomSpec ring_spec(RingMetal metal) {
  PhantomSpec s;
  s.name = metal == RingMetal::Aluminium ? "ring-aluminium" : "ring-iron";
  s.fov = 7.1;
  s.mode = CombineMode::Paint;
  const double ring_density = metal == RingMetal::Aluminium ? 2.34 : 6.70;
  s.shapes = {
      Shape{ShapeKind::Annulus, {0.0, 0.0}, 3.0, 3.5, 0.0, ring_density},
      Shape{ShapeKind::Rect, {0.0, 0.0}, 0.75, 0.625, 0.0, 0.972},
      // 1 mm crack running from the centre to the top edge of the insert.
      Shape{ShapeKind::Rect, {0.3, 0.3125}, 0.05, 0.3125, 0.0, 0.0},
  };
  return s;
}

PhantomSpec disks_spec(double fov, const std::vector<Point>& centers,
                       const std::vector<double>& radii, double density) {
  if (centers.size() != radii.size()) throw ConfigError("disk centres and radii differ in count");
  PhantomSpec s;
  s.name = "disks";
  s.fov = fov;
  s.mode = CombineMode::Add;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (!(radii[k] > 0.0)) throw ConfigError("disk radius must be positive");
    s.shapes.push_back(ellipse(centers[k].x, centers[k].y, radii[k], radii[k], 0.0, density));
  }
  return s;
}

DensityImage thorax_phantom(std::size_t n) {
  if (n < 16) throw ConfigError("thorax phantom needs n >= 16");
  return rasterize(thorax_spec(), n);
}

DensityImage ring_phantom(std::size_t n, RingMetal metal) {
  if (n < 16) throw ConfigError("ring phantom needs n >= 16");
  return rasterize(ring_spec(metal), n);
}

DensityImage disks_phantom(std::size_t n, double fov, const std::vector<Point>& centers,
                           const std::vector<double>& radii, double density) {
  return rasterize(disks_spec(fov, centers, radii, density), n);
}

DensityImage two_disk_phantom(std::size_t n, double fov) {
  const double r = 0.06 * fov;
  return disks_phantom(n, fov, {{-0.2 * fov, 0.1 * fov}, {0.15 * fov, -0.12 * fov}}, {r, r}, 1.0);
}

namespace {

ShapeKind parse_kind(const std::string& k) {
  if (k == "ellipse" || k == "disk") return ShapeKind::Ellipse;
  if (k == "annulus") return ShapeKind::Annulus;
  if (k == "rect") return ShapeKind::Rect;
  throw ConfigError("unknown shape kind '" + k + "'");
}

std::string kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Annulus: return "annulus";
    case ShapeKind::Rect: return "rect";
  }
  return "ellipse";
}

}  // namespace

PhantomSpec parse_phantom_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phantom file: ") + e.what());
  }
  try {
    PhantomSpec s;
    s.name = j.value("name", std::string("custom"));
    s.fov = j.at("fov_cm").get<double>();
    const std::string mode = j.value("mode", std::string("paint"));
    if (mode == "paint") {
      s.mode = CombineMode::Paint;
    } else if (mode == "add") {
      s.mode = CombineMode::Add;
    } else {
      throw ConfigError("phantom mode must be 'paint' or 'add'");
    }
    for (const auto& e : j.at("shapes")) {
      Shape sh;
      const std::string kind = e.at("kind").get<std::string>();
      sh.kind = parse_kind(kind);
      const auto c = e.at("center").get<std::vector<double>>();
      if (c.size() != 2) throw ConfigError("shape centre needs two coordinates");
      sh.center = {c[0], c[1]};
      if (kind == "disk") {
        sh.a = sh.b = e.at("radius").get<double>();
      } else if (sh.kind == ShapeKind::Annulus) {
        sh.a = e.at("inner_radius").get<double>();
        sh.b = e.at("outer_radius").get<double>();
      } else {
        const auto ax = e.at(sh.kind == ShapeKind::Rect ? "half_size" : "semi_axes")
                            .get<std::vector<double>>();
        if (ax.size() != 2) throw ConfigError("shape extents need two values");
        sh.a = ax[0];
        sh.b = ax[1];
      }
      sh.rotation_deg = e.value("rotation_deg", 0.0);
      sh.density = e.at("density").get<double>();
      if (!(sh.a > 0.0 && sh.b > 0.0) || sh.density < 0.0) {
        throw ConfigError("shape extents must be positive and densities nonnegative");
      }
      s.shapes.push_back(sh);
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("phantom file: ") + e.what());
  }
}

std::string phantom_spec_to_json(const PhantomSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["fov_cm"] = spec.fov;
  j["mode"] = spec.mode == CombineMode::Paint ? "paint" : "add";
  j["shapes"] = json::array();
  for (const Shape& sh : spec.shapes) {
    json e;
    e["kind"] = kind_name(sh.kind);
    e["center"] = {sh.center.x, sh.center.y};
    if (sh.kind == ShapeKind::Annulus) {
      e["inner_radius"] = sh.a;
      e["outer_radius"] = sh.b;
    } else if (sh.kind == ShapeKind::Rect) {
      e["half_size"] = {sh.a, sh.b};
    } else {
      e["semi_axes"] = {sh.a, sh.b};
    }
    e["rotation_deg"] = sh.rotation_deg;
    e["density"] = sh.density;
    j["shapes"].push_back(e);
  }
  return j.dump(2) + "\n";
}

PhantomSpec load_phantom_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open phantom file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_phantom_spec(ss.str());
}

RingMetal parse_metal(const std::string& name) {
  if (name == "aluminium" || name == "aluminum" || name == "al") return RingMetal::Aluminium;
  if (name == "iron" || name == "fe") return RingMetal::Iron;
  throw ConfigError("unknown ring metal '" + name + "'");
}

}  // namespace cst
