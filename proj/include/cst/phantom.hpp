#pragma once

#include <string>
#include <vector>

#include "cst/image.hpp"
#include "cst/vec2.hpp"

namespace cst {

enum class ShapeKind { Ellipse, Annulus, Rect };

/// One primitive of a phantom description. Lengths in cm, rotation in degrees.
struct Shape {
  ShapeKind kind = ShapeKind::Ellipse;
  Point center;
  double a = 0.0;  // ellipse semi-axis / rect half-width / annulus inner radius
  double b = 0.0;  // ellipse semi-axis / rect half-height / annulus outer radius
  double rotation_deg = 0.0;
  double density = 0.0;

  [[nodiscard]] bool contains(Point p) const;
};

enum class CombineMode { Paint, Add };

struct PhantomSpec {
  std::string name;
  double fov = 0.0;  // cm
  CombineMode mode = CombineMode::Paint;
  std::vector<Shape> shapes;
};

/// Samples the shapes at every pixel centre. Paint mode lets later shapes
/// overwrite earlier ones; add mode sums densities.
DensityImage rasterize(const PhantomSpec& spec, std::size_t n);

enum class RingMetal { Aluminium, Iron };

PhantomSpec thorax_spec();
PhantomSpec ring_spec(RingMetal metal);
PhantomSpec disks_spec(double fov, const std::vector<Point>& centers,
                       const std::vector<double>& radii, double density);

DensityImage thorax_phantom(std::size_t n);
DensityImage ring_phantom(std::size_t n, RingMetal metal);
DensityImage disks_phantom(std::size_t n, double fov, const std::vector<Point>& centers,
                           const std::vector<double>& radii, double density);

/// Two small disks used to compare first- and second-order spectra.
DensityImage two_disk_phantom(std::size_t n, double fov = 35.0);

/// Read/write the structured phantom description (JSON).
PhantomSpec parse_phantom_spec(const std::string& text);
std::string phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec load_phantom_spec(const std::string& path);

RingMetal parse_metal(const std::string& name);

}  // namespace cst
