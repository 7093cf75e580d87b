#include <doctest.h>

#include "cst/errors.hpp"
#include "cst/pipeline.hpp"
#include "oracles.hpp"

using namespace cst;
using nlohmann::json;

namespace {

PipelineConfig tiny_config() {
  return PipelineConfig::from_json(json::parse(R"({
    "geometry": {"n_sources": 2, "n_detectors": 8, "n_bins": 16},
    "phantom": {"kind": "two-disk", "size": 16},
    "forward": {"second_order": false},
    "noise": {"enabled": false},
    "recon": {"max_iters": 200}
  })"));
}

}  // namespace

TEST_CASE("configuration parsing") {
  const PipelineConfig desk = PipelineConfig::load(CST_SOURCE_DIR "/configs/desk.json");
  CHECK(desk.n_sources == 8);
  CHECK(desk.variant == Variant::FullSpectrumDerivative);
  CHECK(desk.tv_for(Variant::G1Only).lambda == 3e-5);
  CHECK(desk.tv_for(Variant::FullSpectrum).lambda == 3e-2);
  CHECK(desk.gamma == 0.01278125);

  // to_json is a fixed point of parsing.
  const json j = desk.to_json();
  CHECK(PipelineConfig::from_json(j).to_json() == j);

  const PipelineConfig co = PipelineConfig::load(CST_SOURCE_DIR "/configs/cobalt60.json");
  CHECK(co.source.levels.size() == 2);

  CHECK_THROWS_AS((void)PipelineConfig::from_json(json::parse(R"({"geometry": {"n_srcs": 3}})")), ConfigError);
  CHECK_THROWS_AS((void)PipelineConfig::from_json(json::parse(R"({"extra": {}})")), ConfigError);
  CHECK_THROWS_AS((void)PipelineConfig::from_json(json::parse(R"({"geometry": {"n_sources": "many"}})")), ConfigError);
  CHECK_THROWS_AS((void)PipelineConfig::from_json(json::parse(R"({"recon": {"variant": "fancy"}})")), ConfigError);
  CHECK_THROWS_AS((void)PipelineConfig::load(CST_SOURCE_DIR "/configs/missing.json"), Error);
  CHECK(parse_variant("g1-only") == Variant::G1Only);
  CHECK(to_string(Variant::FullSpectrum) == "full-spectrum");
}

TEST_CASE("metrics") {
  const DensityImage a = two_disk_phantom(32);
  const Metrics self = compute_metrics(a, a);
  CHECK(self.relative_rmse == 0.0);
  CHECK(std::isinf(self.psnr_db));

  DensityImage b = a;
  for (double& v : b.values) v *= 1.1;
  CHECK(compute_metrics(b, a).relative_rmse == doctest::Approx(0.1));
  CHECK_THROWS_AS((void)compute_metrics(two_disk_phantom(16), a), ShapeMismatch);
}

TEST_CASE("first-order data is reproduced by the operator built from the truth") {
  const PipelineConfig cfg = tiny_config();
  const DensityImage truth = make_phantom(cfg);
  const SimulatedData sim = simulate(cfg, truth);
  CHECK(!sim.g2.has_value());
  CHECK(sim.measured.counts == sim.g1.counts);
  REQUIRE(sim.g1.has_ballistic());

  const SparseOperator op = assemble_operator(cfg, truth);
  const auto pred = op(truth.values);
  CHECK(oracle::rel_l2(pred, sim.g1.counts) < 1e-10);

  // The prepared g1-only problem has (near) zero residual at the truth.
  const PreparedProblem prep = prepare_cst_problem(cfg, op, sim.g1, Variant::G1Only, {});
  const Objective obj = objective_and_gradient(prep.problem, truth.values);
  CHECK(std::sqrt(2.0 * obj.data_term) < 1e-10 * oracle::norm(prep.problem.data));

  const SolveResult ct = reconstruct_ct(cfg, sim.measured);
  CHECK(ct.image.size() == truth.size());
  CHECK(ct.report.iterations > 0);
}

TEST_CASE("reconstruction input errors") {
  const PipelineConfig cfg = tiny_config();
  const DensityImage truth = make_phantom(cfg);
  Spectrum s = simulate(cfg, truth).measured;
  const SparseOperator op = assemble_operator(cfg, truth);

  Spectrum stripped = s;
  stripped.ballistic.clear();
  CHECK_THROWS_AS((void)reconstruct_ct(cfg, stripped), MissingBallistic);

  Spectrum moved = s;
  moved.metadata["fingerprints"]["geometry"] = "0000000000000000";
  CHECK_THROWS_AS((void)prepare_cst_problem(cfg, op, moved, Variant::G1Only, {}), FingerprintMismatch);

  Spectrum short_spec(1, 8, make_grid(cfg));
  CHECK_THROWS_AS((void)prepare_cst_problem(cfg, op, short_spec, Variant::G1Only, {}), ShapeMismatch);
}

TEST_CASE("noise helpers") {
  PipelineConfig cfg = tiny_config();
  cfg.noise = true;
  cfg.photons_per_source = 1e6;
  const DensityImage truth = make_phantom(cfg);
  const SimulatedData sim = simulate(cfg, truth);
  const double expected = expected_relative_noise(sim.g1, cfg.photons_per_source);
  const double measured = relative_noise(sim.measured, sim.g1);
  CHECK(measured == doctest::Approx(expected).epsilon(0.2));
  CHECK(relative_noise(sim.g1, sim.g1) == 0.0);
}
