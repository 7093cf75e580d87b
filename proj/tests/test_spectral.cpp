#include <doctest.h>

#include <cmath>

#include "cst/errors.hpp"
#include "cst/sparse.hpp"
#include "cst/spectral.hpp"
#include "oracles.hpp"

using namespace cst;
using oracle::kPi;

TEST_CASE("derivative of a constant vanishes") {
  const std::vector<double> row(64, 3.5);
  for (BoundaryRule rule : {BoundaryRule::EvenReflection, BoundaryRule::Periodic}) {
    const auto out = smoothed_derivative(row, 0.0128, {0.03, rule});
    CHECK(oracle::max_abs(out) < 1e-10 * 3.5);
  }
}

TEST_CASE("periodic derivative of a sine") {
  const std::size_t n = 128;
  const double dE = 0.01;
  const double L = n * dE;
  const double gamma = 3.0 * dE;
  for (int k : {1, 3, 7}) {
    const double zeta = 2.0 * kPi * k / L;
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = std::sin(zeta * j * dE);
    const auto out = smoothed_derivative(row, dE, {gamma, BoundaryRule::Periodic});
    const double gain = std::exp(-0.5 * gamma * gamma * zeta * zeta);
    for (std::size_t j = 0; j < n; ++j) {
      REQUIRE(std::abs(out[j] - zeta * std::cos(zeta * j * dE) * gain) < 1e-6 * zeta);
    }
  }
}

TEST_CASE("wide filters suppress everything") {
  oracle::Gen gen(59);
  const auto row = gen.vec(64);
  const auto out = smoothed_derivative(row, 0.01, {10.0, BoundaryRule::EvenReflection});
  CHECK(oracle::max_abs(out) < 1e-10);
}

TEST_CASE("one-hot input has zero mean output under the periodic rule") {
  for (std::size_t hot : {0, 17, 63}) {
    std::vector<double> row(64, 0.0);
    row[hot] = 1.0;
    const auto out = smoothed_derivative(row, 0.01, {0.03, BoundaryRule::Periodic});
    double sum = 0.0;
    for (double v : out) sum += v;
    CHECK(std::abs(sum) < 1e-10);
    // Energy-local: the response decays away from the hot bin.
    const std::size_t far = (hot + 32) % 64;
    CHECK(std::abs(out[far]) < 1e-6 * oracle::max_abs(out));
  }
}

TEST_CASE("explicit matrix, linearity and adjoint") {
  const std::size_t n = 48;
  oracle::Gen gen(61);
  for (BoundaryRule rule : {BoundaryRule::EvenReflection, BoundaryRule::Periodic}) {
    const DerivativeConfig cfg{-1.0, rule};
    const SpectralDerivative D(n, 0.02, cfg);
    const auto x = gen.vec(n), y = gen.vec(n);
    std::vector<double> dx(n), dty(n);
    D.apply(x, dx);
    D.apply_transpose(y, dty);
    const auto direct = smoothed_derivative(x, 0.02, cfg);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(dx[i] - direct[i]) < 1e-10 * oracle::max_abs(direct));
    CHECK(std::abs(oracle::dot(dx, y) - oracle::dot(x, dty)) < 1e-10 * oracle::norm(dx) * oracle::norm(y));

    // Linearity and scaling.
    const double a = -2.7;
    std::vector<double> comb(n);
    for (std::size_t i = 0; i < n; ++i) comb[i] = a * x[i] + y[i];
    const auto dc = smoothed_derivative(comb, 0.02, cfg);
    const auto dy = smoothed_derivative(y, 0.02, cfg);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(dc[i] - (a * direct[i] + dy[i])) < 1e-12 * 10.0);
  }
  CHECK(DerivativeConfig{}.resolved_gamma(0.01) == doctest::Approx(0.03));
}

TEST_CASE("spectrum preprocessing") {
  Spectrum s(2, 3, EnergyGrid::default_grid(32));
  oracle::Gen gen(67);
  for (double& c : s.counts) c = gen.uniform(0, 1);
  const DerivativeConfig cfg{};
  const auto data = apply_D_to_spectrum(s, cfg);
  REQUIRE(data.size() == s.counts.size());
  for (std::size_t p = 0; p < s.n_pairs(); ++p) {
    const auto row = smoothed_derivative(s.row(p), s.grid.width(0), cfg);
    for (std::size_t b = 0; b < 32; ++b) REQUIRE(data[p * 32 + b] == doctest::Approx(row[b]).epsilon(1e-12));
  }
  Spectrum bad = s;
  bad.grid.edges[5] += 0.003;
  CHECK_THROWS_AS((void)apply_D_to_spectrum(bad, cfg), ConfigError);
}

TEST_CASE("derivative composed with an operator") {
  const std::size_t bins = 32, pairs = 5, cols = 40;
  oracle::Gen gen(71);
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < bins * pairs; ++r) {
    for (int k = 0; k < 6; ++k) t.push_back({r, static_cast<std::uint32_t>(gen.index(cols)), gen.uniform(0, 1)});
  }
  const SparseOperator A = SparseOperator::from_triplets(bins * pairs, cols, t);
  const EnergyGrid grid = EnergyGrid::default_grid(bins);
  const DerivativeComposedMap DA(A, grid, {});
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = gen.vec(cols), y = gen.vec(bins * pairs);
    const double lhs = oracle::dot(DA(x), y);
    const double rhs = oracle::dot(x, DA.adjoint(y));
    REQUIRE(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
  // D o A x equals preprocessing the spectrum A x.
  const auto x = gen.vec(cols);
  Spectrum s(1, pairs, grid);
  s.counts = A(x);
  const auto expect = apply_D_to_spectrum(s, {});
  const auto got = DA(x);
  for (std::size_t q = 0; q < got.size(); ++q) REQUIRE(std::abs(got[q] - expect[q]) < 1e-10 * oracle::max_abs(expect));
}
