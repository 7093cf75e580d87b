#include "cst/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "cst/errors.hpp"

namespace cst {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Forward differences with zero difference across the last row/column.
void differences(std::span<const double> f, std::size_t n, std::vector<double>& gx,
                 std::vector<double>& gy) {
  gx.assign(n * n, 0.0);
  gy.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t q = i * n + j;
      if (j + 1 < n) gx[q] = f[q + 1] - f[q];
      if (i + 1 < n) gy[q] = f[q + n] - f[q];
    }
  }
}

/// phi(alpha) - phi(0) and phi'(alpha) along f + alpha p, evaluated without
/// cancellation so that the line search stays meaningful near the optimum.
class LineFunction {
 public:
  LineFunction(const ReconProblem& pr, std::span<const double> f, std::span<const double> residual,
               std::span<const double> p, std::span<const double> ap)
      : lambda_(pr.tv.lambda), beta_(pr.tv.beta) {
    rq_ = dot(residual, ap);
    qq_ = dot(ap, ap);
    if (lambda_ > 0.0) {
      differences(f, pr.image_side, gx0_, gy0_);
      differences(p, pr.image_side, gxp_, gyp_);
    }
  }

  [[nodiscard]] double delta(double a) const {
    double v = a * rq_ + 0.5 * a * a * qq_;
    if (lambda_ > 0.0) {
      double t = 0.0;
      for (std::size_t q = 0; q < gx0_.size(); ++q) {
        const double cross = gx0_[q] * gxp_[q] + gy0_[q] * gyp_[q];
        const double pp = gxp_[q] * gxp_[q] + gyp_[q] * gyp_[q];
        const double diff = 2.0 * a * cross + a * a * pp;
        const double a0 = gx0_[q] * gx0_[q] + gy0_[q] * gy0_[q] + beta_;
        t += diff / (std::sqrt(a0 + diff) + std::sqrt(a0));
      }
      v += lambda_ * t;
    }
    return v;
  }

  [[nodiscard]] double slope(double a) const {
    double v = rq_ + a * qq_;
    if (lambda_ > 0.0) {
      double t = 0.0;
      for (std::size_t q = 0; q < gx0_.size(); ++q) {
        const double gx = gx0_[q] + a * gxp_[q];
        const double gy = gy0_[q] + a * gyp_[q];
        t += (gx * gxp_[q] + gy * gyp_[q]) / std::sqrt(gx * gx + gy * gy + beta_);
      }
      v += lambda_ * t;
    }
    return v;
  }

  [[nodiscard]] double quadratic_step(double dphi0) const {
    return qq_ > 0.0 ? -dphi0 / qq_ : 0.0;
  }

  std::size_t evaluations = 0;

 private:
  double lambda_;
  double beta_;
  double rq_ = 0.0;
  double qq_ = 0.0;
  std::vector<double> gx0_, gy0_, gxp_, gyp_;
};

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double delta = 0.0;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), if defined.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

LineSearchResult strong_wolfe(LineFunction& fn, double dphi0, double alpha0) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.1;
  constexpr int max_bracket = 60;
  constexpr int max_zoom = 60;

  auto eval = [&](double a) {
    ++fn.evaluations;
    return fn.delta(a);
  };

  auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi) {
    for (int it = 0; it < max_zoom; ++it) {
      const double width = hi - lo;
      double a = cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi);
      const double left = std::min(lo, hi) + 0.1 * std::abs(width);
      const double right = std::max(lo, hi) - 0.1 * std::abs(width);
      if (!std::isfinite(a) || a < left || a > right) a = 0.5 * (lo + hi);
      const double fa = eval(a);
      if (fa > c1 * a * dphi0 || fa >= f_lo) {
        hi = a;
        f_hi = fa;
        d_hi = fn.slope(a);
      } else {
        const double da = fn.slope(a);
        if (std::abs(da) <= -c2 * dphi0) return LineSearchResult{true, a, fa};
        if (da * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        lo = a;
        f_lo = fa;
        d_lo = da;
      }
      if (std::abs(hi - lo) <= 1e-15 * std::max(std::abs(lo), std::abs(hi))) break;
    }
    // Accept the best sufficient-decrease point found if it makes progress.
    if (lo > 0.0 && f_lo < 0.0) return LineSearchResult{true, lo, f_lo};
    return LineSearchResult{};
  };

  double a_prev = 0.0;
  double f_prev = 0.0;
  double d_prev = dphi0;
  double a = alpha0;
  for (int it = 0; it < max_bracket; ++it) {
    const double fa = eval(a);
    if (fa > c1 * a * dphi0 || (it > 0 && fa >= f_prev)) {
      return zoom(a_prev, f_prev, d_prev, a, fa, fn.slope(a));
    }
    const double da = fn.slope(a);
    if (std::abs(da) <= -c2 * dphi0) return LineSearchResult{true, a, fa};
    if (da >= 0.0) return zoom(a, fa, da, a_prev, f_prev, d_prev);
    a_prev = a;
    f_prev = fa;
    d_prev = da;
    a *= 2.0;
  }
  return LineSearchResult{};
}

}  // namespace

double tv_smoothed(std::span<const double> image, std::size_t n, double beta) {
  if (!(beta > 0.0)) throw ConfigError("TV smoothing beta must be positive");
  if (image.size() != n * n) throw ShapeMismatch("tv_smoothed: image is not n x n");
  std::vector<double> gx, gy;
  differences(image, n, gx, gy);
  double s = 0.0;
  for (std::size_t q = 0; q < gx.size(); ++q) s += std::sqrt(gx[q] * gx[q] + gy[q] * gy[q] + beta);
  return s;
}

void tv_gradient(std::span<const double> image, std::size_t n, double beta, std::span<double> out) {
  if (image.size() != n * n || out.size() != n * n) throw ShapeMismatch("tv_gradient: image is not n x n");
  std::vector<double> gx, gy;
  differences(image, n, gx, gy);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t q = i * n + j;
      const double w = 1.0 / std::sqrt(gx[q] * gx[q] + gy[q] * gy[q] + beta);
      if (j + 1 < n) {
        out[q + 1] += w * gx[q];
        out[q] -= w * gx[q];
      }
      if (i + 1 < n) {
        out[q + n] += w * gy[q];
        out[q] -= w * gy[q];
      }
    }
  }
}

void ReconProblem::validate() const {
  if (op == nullptr) throw ConfigError("problem has no operator");
  if (data.size() != op->rows()) throw ShapeMismatch("data length does not match operator rows");
  if (!initial.empty() && initial.size() != op->cols()) throw ShapeMismatch("initial image size");
  if (tv.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (!(tv.beta > 0.0)) throw ConfigError("beta must be positive");
  if (tv.lambda > 0.0 && image_side * image_side != op->cols()) {
    throw ShapeMismatch("TV needs a square image matching the operator columns");
  }
}

Objective objective_and_gradient(const ReconProblem& problem, std::span<const double> image) {
  problem.validate();
  if (image.size() != problem.op->cols()) throw ShapeMismatch("image size does not match operator");
  Objective obj;
  std::vector<double> r = (*problem.op)(image);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= problem.data[i];
  obj.data_term = 0.5 * dot(r, r);
  obj.gradient = problem.op->adjoint(r);
  if (problem.tv.lambda > 0.0) {
    obj.tv = tv_smoothed(image, problem.image_side, problem.tv.beta);
    std::vector<double> g(image.size());
    tv_gradient(image, problem.image_side, problem.tv.beta, g);
    for (std::size_t i = 0; i < g.size(); ++i) obj.gradient[i] += problem.tv.lambda * g[i];
  } else if (problem.image_side * problem.image_side == image.size() && problem.image_side > 0) {
    obj.tv = tv_smoothed(image, problem.image_side, problem.tv.beta);
  }
  obj.value = obj.data_term + problem.tv.lambda * obj.tv;
  return obj;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::Stagnation: return "stagnation";
  }
  return "unknown";
}

nlohmann::json SolveReport::to_json(bool include_wall_time) const {
  nlohmann::json j;
  j["status"] = to_string(status);
  j["iterations"] = iterations;
  j["final_objective"] = final_objective;
  j["final_gradient_norm"] = final_gradient_norm;
  j["function_evaluations"] = function_evaluations;
  j["restarts"] = restarts;
  j["line_search_failures"] = line_search_failures;
  j["objective_history"] = objective_history;
  if (include_wall_time) j["wall_seconds"] = wall_seconds;
  return j;
}

SolveResult fletcher_reeves(const ReconProblem& problem) {
  problem.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const LinearMap& A = *problem.op;
  const std::size_t n = A.cols();
  const std::size_t period = problem.restart_period > 0
                                 ? problem.restart_period
                                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n)))));

  SolveResult res;
  res.image = problem.initial.empty() ? std::vector<double>(n, 0.0) : problem.initial;
  SolveReport& rep = res.report;

  Objective obj = objective_and_gradient(problem, res.image);
  rep.function_evaluations = 1;
  double E = obj.value;
  rep.objective_history.push_back(E);
  std::vector<double> g = obj.gradient;
  double gnorm2 = dot(g, g);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
  std::size_t since_restart = 0;
  double prev_alpha = 0.0;
  double prev_slope = 0.0;
  rep.status = SolveStatus::MaxIterations;

  while (true) {
    if (std::sqrt(gnorm2) <= problem.grad_tol) {
      rep.status = SolveStatus::Converged;
      break;
    }
    if (rep.iterations >= problem.max_iters) break;

    std::vector<double> r = A(res.image);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= problem.data[i];

    LineSearchResult ls;
    bool steepest = since_restart == 0;
    for (int attempt = 0; attempt < 2; ++attempt) {
      double dphi0 = dot(g, p);
      if (!(dphi0 < 0.0)) {
        for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
        dphi0 = -gnorm2;
        if (!steepest) ++rep.restarts;
        steepest = true;
        since_restart = 0;
      }
      const std::vector<double> ap = A(p);
      LineFunction fn(problem, res.image, r, p, ap);
      double alpha0 = fn.quadratic_step(dphi0);
      if (problem.tv.lambda > 0.0 || !(alpha0 > 0.0)) {
        const double guess = prev_alpha > 0.0 ? prev_alpha * prev_slope / dphi0 : 1.0 / std::sqrt(gnorm2);
        alpha0 = alpha0 > 0.0 ? std::min(alpha0, std::max(guess, 1e-3 * alpha0)) : guess;
      }
      ls = strong_wolfe(fn, dphi0, alpha0);
      rep.function_evaluations += fn.evaluations;
      if (ls.ok) {
        prev_alpha = ls.alpha;
        prev_slope = dphi0;
        break;
      }
      ++rep.line_search_failures;
      if (steepest) break;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      ++rep.restarts;
      steepest = true;
      since_restart = 0;
    }
    if (!ls.ok) {
      rep.status = SolveStatus::Stagnation;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) res.image[i] += ls.alpha * p[i];
    E += ls.delta;
    rep.objective_history.push_back(E);
    ++rep.iterations;

    obj = objective_and_gradient(problem, res.image);
    ++rep.function_evaluations;
    const double gnorm2_new = dot(obj.gradient, obj.gradient);
    g = std::move(obj.gradient);
    ++since_restart;
    if (since_restart >= period) {
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
      since_restart = 0;
      ++rep.restarts;
    } else {
      const double beta_fr = gnorm2_new / gnorm2;
      for (std::size_t i = 0; i < n; ++i) p[i] = -g[i] + beta_fr * p[i];
    }
    gnorm2 = gnorm2_new;
  }

  const Objective fin = objective_and_gradient(problem, res.image);
  rep.final_objective = fin.value;
  rep.final_gradient_norm = norm(fin.gradient);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t count) {
  if (count == 0 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("invalid geometric grid");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = lo * std::pow(hi / lo, t);
  }
  out.back() = hi;
  return out;
}

LCurveResult lcurve_select(const ReconProblem& problem_template, std::vector<double> lambdas) {
  if (lambdas.empty()) throw ConfigError("L-curve needs at least one lambda");
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  LCurveResult out;
  std::vector<std::vector<double>> images;
  ReconProblem pr = problem_template;
  for (double lam : lambdas) {
    pr.tv.lambda = lam;
    SolveResult sr = fletcher_reeves(pr);
    const Objective obj = objective_and_gradient(pr, sr.image);
    LCurvePoint pt;
    pt.lambda = lam;
    pt.residual_norm = std::sqrt(2.0 * obj.data_term);
    pt.tv = obj.tv;
    pt.status = sr.report.status;
    pt.iterations = sr.report.iterations;
    out.table.push_back(pt);
    pr.initial = sr.image;
    images.push_back(std::move(sr.image));
  }

  const std::size_t m = out.table.size();
  if (m < 3) {
    out.index = m - 1;
    out.warning = true;
    out.message = "fewer than three lambda values; returning the largest";
  } else {
    std::vector<double> t(m), xi(m), eta(m);
    for (std::size_t i = 0; i < m; ++i) {
      t[i] = std::log(out.table[i].lambda);
      xi[i] = std::log(std::max(out.table[i].residual_norm, 1e-300));
      eta[i] = std::log(std::max(out.table[i].tv, 1e-300));
    }
    // Three-point derivatives on a possibly non-uniform parameter grid.
    auto derivs = [&](const std::vector<double>& y, std::size_t i) {
      const double h1 = t[i] - t[i - 1];
      const double h2 = t[i + 1] - t[i];
      const double d1 = (y[i - 1] * (-h2 / (h1 * (h1 + h2))) + y[i] * ((h2 - h1) / (h1 * h2)) +
                         y[i + 1] * (h1 / (h2 * (h1 + h2))));
      const double d2 = 2.0 * (y[i - 1] / (h1 * (h1 + h2)) - y[i] / (h1 * h2) + y[i + 1] / (h2 * (h1 + h2)));
      return std::pair{d1, d2};
    };
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const auto [x1, x2] = derivs(xi, i);
      const auto [y1, y2] = derivs(eta, i);
      const double den = std::pow(x1 * x1 + y1 * y1, 1.5);
      out.table[i].curvature = den > 0.0 ? (x1 * y2 - x2 * y1) / den : 0.0;
    }
    std::size_t best = 1;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      if (out.table[i].curvature >= out.table[best].curvature) best = i;  // ties go to larger lambda
    }
    bool increasing = true;
    bool decreasing = true;
    for (std::size_t i = 2; i + 1 < m; ++i) {
      if (out.table[i].curvature < out.table[i - 1].curvature) increasing = false;
      if (out.table[i].curvature > out.table[i - 1].curvature) decreasing = false;
    }
    const bool monotone = m > 3 && (increasing || decreasing);
    if (monotone || !(out.table[best].curvature > 0.0)) {
      out.warning = true;
      out.index = decreasing ? 0 : m - 1;
      out.message = "no interior corner on the L-curve; returning an endpoint";
    } else {
      out.index = best;
    }
  }
  out.lambda_star = out.table[out.index].lambda;
  out.image = images[out.index];
  return out;
}

}  // namespace cst
