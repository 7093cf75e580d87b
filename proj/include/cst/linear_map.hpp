#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cst {

/// Linear operator with an exact adjoint, seen as a matrix rows x cols.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  [[nodiscard]] virtual std::size_t rows() const = 0;
  [[nodiscard]] virtual std::size_t cols() const = 0;
  /// y = A x; y is overwritten.
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
  /// x = A^T y; x is overwritten.
  virtual void apply_adjoint(std::span<const double> y, std::span<double> x) const = 0;

  [[nodiscard]] std::vector<double> operator()(std::span<const double> x) const {
    std::vector<double> y(rows());
    apply(x, y);
    return y;
  }
  [[nodiscard]] std::vector<double> adjoint(std::span<const double> y) const {
    std::vector<double> x(cols());
    apply_adjoint(y, x);
    return x;
  }
};

/// s * A, sharing the wrapped map.
class ScaledMap final : public LinearMap {
 public:
  ScaledMap(const LinearMap& inner, double scale) : inner_(inner), scale_(scale) {}
  [[nodiscard]] std::size_t rows() const override { return inner_.rows(); }
  [[nodiscard]] std::size_t cols() const override { return inner_.cols(); }
  void apply(std::span<const double> x, std::span<double> y) const override {
    inner_.apply(x, y);
    for (double& v : y) v *= scale_;
  }
  void apply_adjoint(std::span<const double> y, std::span<double> x) const override {
    inner_.apply_adjoint(y, x);
    for (double& v : x) v *= scale_;
  }

 private:
  const LinearMap& inner_;
  double scale_;
};

}  // namespace cst
