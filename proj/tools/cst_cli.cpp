#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cst/errors.hpp"
#include "cst/io.hpp"
#include "cst/pipeline.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kIo = 1,
  kConfig = 2,
  kFingerprint = 3,
  kStagnation = 4,
  kMissingBallistic = 5,
  kLevelSpacing = 6,
};

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  double gamma = std::nan("");
  double lambda = std::nan("");
  double beta = std::nan("");
  std::string variant;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
}

void add_recon_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--gamma", o.gamma, "Derivative filter scale in MeV");
  cmd->add_option("--lambda", o.lambda, "TV weight");
  cmd->add_option("--beta", o.beta, "TV smoothing");
  cmd->add_option("--variant", o.variant, "g1-only | full-spectrum | full-spectrum+derivative");
}

cst::PipelineConfig load_config(const Overrides& o, CLI::App* cmd) {
  cst::PipelineConfig cfg = cst::PipelineConfig::load(o.config);
  if (cmd->get_option_no_throw("--seed") && cmd->count("--seed") > 0) cfg.seed = o.seed;
  if (!std::isnan(o.gamma)) cfg.gamma = o.gamma;
  if (!std::isnan(o.lambda)) {
    cfg.tv.lambda = o.lambda;
    cfg.lambda_by_variant.clear();
  }
  if (!std::isnan(o.beta)) cfg.tv.beta = o.beta;
  if (!o.variant.empty()) cfg.variant = cst::parse_variant(o.variant);
  return cfg;
}

cst::DensityImage to_image(const cst::PipelineConfig& cfg, const std::vector<double>& values) {
  cst::DensityImage img(cfg.image_size, cst::phantom_fov(cfg));
  img.values = values;
  return img;
}

void report_solve(const cst::SolveReport& rep, const std::string& path) {
  std::cerr << "solver: " << cst::to_string(rep.status) << " after " << rep.iterations
            << " iterations, objective " << rep.final_objective << ", |grad| " << rep.final_gradient_norm
            << ", " << std::fixed << std::setprecision(2) << rep.wall_seconds << " s\n"
            << std::defaultfloat;
  if (!path.empty()) cst::write_text_file(path, rep.to_json().dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint CT and Compton scattering tomography pipeline"};
  app.require_subcommand(1);
  Overrides o;

  std::string out, pgm, csv, phantom_path, spectrum_path, prior_path, operator_path, report_path, g1_path,
      image_path, reference_path, lambdas;

  auto* phantom = app.add_subcommand("phantom", "Rasterize the configured phantom");
  add_common(phantom, o);
  phantom->add_option("-o,--out", out, "Output image (.csti)")->required();
  phantom->add_option("--pgm", pgm, "Also write a 16-bit PGM");

  auto* forward = app.add_subcommand("forward", "Simulate ballistic and scatter spectra");
  add_common(forward, o);
  forward->add_option("--phantom", phantom_path, "Ground-truth image (.csti)")->required();
  forward->add_option("-o,--out", out, "Measured spectrum (.csts)")->required();
  forward->add_option("--g1-out", g1_path, "Noise-free first-order spectrum (.csts)");
  forward->add_option("--csv", csv, "Also write the measured spectrum as CSV");
  forward->add_option("--seed", o.seed, "Noise seed");

  auto* recon_ct = app.add_subcommand("recon-ct", "Sparse-view CT prior from the ballistic channel");
  add_common(recon_ct, o);
  recon_ct->add_option("--spectrum", spectrum_path, "Spectrum with ballistic channel")->required();
  recon_ct->add_option("-o,--out", out, "Prior image (.csti)")->required();
  recon_ct->add_option("--pgm", pgm, "Also write a 16-bit PGM");
  recon_ct->add_option("--report", report_path, "Solver report (JSON)");

  auto* assemble = app.add_subcommand("assemble", "Assemble the linearized first-order operator");
  add_common(assemble, o);
  assemble->add_option("--prior", prior_path, "Prior image (.csti)")->required();
  assemble->add_option("-o,--out", out, "Operator (.cstm)")->required();

  auto* recon_cst = app.add_subcommand("recon-cst", "Reconstruct from scatter spectra");
  add_common(recon_cst, o);
  add_recon_flags(recon_cst, o);
  recon_cst->add_option("--operator", operator_path, "Operator (.cstm)")->required();
  recon_cst->add_option("--spectrum", spectrum_path, "Spectrum (.csts)")->required();
  recon_cst->add_option("--prior", prior_path, "Initial image (.csti)");
  recon_cst->add_option("-o,--out", out, "Reconstruction (.csti)")->required();
  recon_cst->add_option("--pgm", pgm, "Also write a 16-bit PGM");
  recon_cst->add_option("--report", report_path, "Solver report (JSON)");

  auto* lcurve = app.add_subcommand("lcurve", "L-curve sweep over lambda");
  add_common(lcurve, o);
  add_recon_flags(lcurve, o);
  lcurve->add_option("--operator", operator_path, "Operator (.cstm)")->required();
  lcurve->add_option("--spectrum", spectrum_path, "Spectrum (.csts)")->required();
  lcurve->add_option("--prior", prior_path, "Initial image (.csti)");
  lcurve->add_option("--lambdas", lambdas, "lo,hi,count of a geometric grid")->required();
  lcurve->add_option("-o,--out", out, "Table (JSON)")->required();

  auto* metrics = app.add_subcommand("metrics", "Relative RMSE and PSNR against a reference");
  metrics->add_option("--image", image_path, "Image (.csti)")->required();
  metrics->add_option("--reference", reference_path, "Reference image (.csti)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*phantom) {
      const auto cfg = load_config(o, phantom);
      const auto img = cst::make_phantom(cfg);
      cst::write_image(out, img, {{"kind", "phantom"}, {"phantom", cfg.phantom}});
      if (!pgm.empty()) cst::write_pgm(pgm, img);
    } else if (*forward) {
      const auto cfg = load_config(o, forward);
      const auto truth = cst::read_image(phantom_path);
      if (truth.n != cfg.image_size) throw cst::ShapeMismatch("phantom size differs from the config");
      const auto data = cst::simulate(cfg, truth);
      cst::write_spectrum(out, data.measured);
      if (!g1_path.empty()) cst::write_spectrum(g1_path, data.g1);
      if (!csv.empty()) cst::write_spectrum_csv(csv, data.measured);
    } else if (*recon_ct) {
      const auto cfg = load_config(o, recon_ct);
      const auto spectrum = cst::read_spectrum(spectrum_path);
      const auto res = cst::reconstruct_ct(cfg, spectrum);
      const auto img = to_image(cfg, res.image);
      cst::write_image(out, img, {{"kind", "ct-prior"}, {"report", res.report.to_json()}});
      if (!pgm.empty()) cst::write_pgm(pgm, img);
      report_solve(res.report, report_path);
      if (res.report.status == cst::SolveStatus::Stagnation) return kStagnation;
    } else if (*assemble) {
      const auto cfg = load_config(o, assemble);
      const auto prior = cst::read_image(prior_path);
      if (prior.n != cfg.image_size) throw cst::ShapeMismatch("prior size differs from the config");
      cst::write_operator(out, cst::assemble_operator(cfg, prior));
    } else if (*recon_cst || *lcurve) {
      CLI::App* cmd = *recon_cst ? recon_cst : lcurve;
      const auto cfg = load_config(o, cmd);
      const auto op = cst::read_operator(operator_path);
      const auto spectrum = cst::read_spectrum(spectrum_path);
      std::vector<double> init;
      if (!prior_path.empty() && cfg.init_from_prior) init = cst::read_image(prior_path).values;
      if (*recon_cst) {
        const auto res = cst::reconstruct_cst(cfg, op, spectrum, cfg.variant, init);
        const auto img = to_image(cfg, res.image);
        cst::write_image(out, img,
                         {{"kind", "cst-reconstruction"}, {"variant", cst::to_string(cfg.variant)},
                          {"report", res.report.to_json()}});
        if (!pgm.empty()) cst::write_pgm(pgm, img);
        report_solve(res.report, report_path);
        if (res.report.status == cst::SolveStatus::Stagnation) return kStagnation;
      } else {
        double lo = 0.0, hi = 0.0;
        std::size_t count = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ls(lambdas);
        if (!(ls >> lo >> c1 >> hi >> c2 >> count) || c1 != ',' || c2 != ',') {
          throw cst::ConfigError("--lambdas expects lo,hi,count");
        }
        const auto prep = cst::prepare_cst_problem(cfg, op, spectrum, cfg.variant, init);
        const auto res = cst::lcurve_select(prep.problem, cst::geometric_grid(lo, hi, count));
        nlohmann::json j;
        j["lambda_star"] = res.lambda_star;
        j["warning"] = res.warning;
        j["message"] = res.message;
        j["table"] = nlohmann::json::array();
        for (const auto& p : res.table) {
          j["table"].push_back({{"lambda", p.lambda}, {"residual_norm", p.residual_norm}, {"tv", p.tv},
                                {"curvature", p.curvature}, {"status", cst::to_string(p.status)},
                                {"iterations", p.iterations}});
        }
        cst::write_text_file(out, j.dump(2) + "\n");
        std::cout << "lambda* = " << res.lambda_star << (res.warning ? " (warning: " + res.message + ")" : "")
                  << "\n";
      }
    } else if (*metrics) {
      const auto img = cst::read_image(image_path);
      const auto ref = cst::read_image(reference_path);
      const auto m = cst::compute_metrics(img, ref);
      std::cout << nlohmann::json{{"relative_rmse", m.relative_rmse}, {"psnr_db", m.psnr_db}}.dump() << "\n";
    }
  } catch (const cst::FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFingerprint;
  } catch (const cst::MissingBallistic& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingBallistic;
  } catch (const cst::LevelSpacingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLevelSpacing;
  } catch (const cst::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const cst::ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
