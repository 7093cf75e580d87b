#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cst/linear_map.hpp"

namespace cst {

struct TVParams {
  double lambda = 0.0;
  double beta = 1e-6;
};

/// Smoothed isotropic total variation of an n x n image with forward
/// differences and replicate (Neumann) boundary.
double tv_smoothed(std::span<const double> image, std::size_t n, double beta);

/// Gradient of tv_smoothed, written to `out`.
void tv_gradient(std::span<const double> image, std::size_t n, double beta, std::span<double> out);

struct ReconProblem {
  const LinearMap* op = nullptr;
  std::vector<double> data;
  std::size_t image_side = 0;  // the unknown is image_side^2 pixels when TV is active
  TVParams tv;
  std::vector<double> initial;  // empty means zero
  std::size_t max_iters = 500;
  double grad_tol = 1e-8;
  std::size_t restart_period = 0;  // 0 means round(sqrt(unknowns))

  void validate() const;
};

struct Objective {
  double value = 0.0;
  double data_term = 0.0;
  double tv = 0.0;
  std::vector<double> gradient;
};

/// 0.5 ||A f - g||^2 + lambda J_beta(f) and its gradient.
Objective objective_and_gradient(const ReconProblem& problem, std::span<const double> image);

enum class SolveStatus { Converged, MaxIterations, Stagnation };

std::string to_string(SolveStatus status);

struct SolveReport {
  std::size_t iterations = 0;
  std::vector<double> objective_history;
  double final_gradient_norm = 0.0;
  double final_objective = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  std::size_t function_evaluations = 0;
  std::size_t restarts = 0;
  std::size_t line_search_failures = 0;
  double wall_seconds = 0.0;

  /// Structured record; wall time is omitted unless asked for, so that
  /// reports written to disk are reproducible.
  [[nodiscard]] nlohmann::json to_json(bool include_wall_time = false) const;
};

struct SolveResult {
  std::vector<double> image;
  SolveReport report;
};

/// Fletcher-Reeves nonlinear conjugate gradients with a strong Wolfe line
/// search (c1 = 1e-4, c2 = 0.1).
SolveResult fletcher_reeves(const ReconProblem& problem);

struct LCurvePoint {
  double lambda = 0.0;
  double residual_norm = 0.0;
  double tv = 0.0;
  double curvature = 0.0;  // zero at the endpoints
  SolveStatus status = SolveStatus::MaxIterations;
  std::size_t iterations = 0;
};

struct LCurveResult {
  double lambda_star = 0.0;
  std::size_t index = 0;
  std::vector<LCurvePoint> table;  // increasing lambda
  bool warning = false;
  std::string message;
  std::vector<double> image;  // reconstruction at lambda_star
};

/// Solves the template problem for every lambda (warm-started, increasing
/// order) and picks the corner of the log-log residual / TV curve.
LCurveResult lcurve_select(const ReconProblem& problem_template, std::vector<double> lambdas);

/// Geometric grid of `count` values from lo to hi.
std::vector<double> geometric_grid(double lo, double hi, std::size_t count);

}  // namespace cst
