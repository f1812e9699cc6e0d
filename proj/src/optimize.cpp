#include "ascertain/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ascertain/error.hpp"

namespace ascertain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimization view of the objective; failures become +inf.
struct Problem {
  const Objective& objective;
  int evaluations = 0;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    ++evaluations;
    grad.resize(x.size());
    double v;
    try {
      v = objective(x, grad);
    } catch (const NumericalError&) {
      return kInf;
    }
    if (!std::isfinite(v) || !grad.allFinite()) return kInf;
    grad = -grad;
    return -v;
  }
};

struct LinePoint {
  double step = 0.0;
  double f = kInf;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

// Strong-Wolfe line search (Nocedal & Wright, algorithms 3.5 and 3.6).
bool line_search(Problem& problem, const Eigen::VectorXd& x0, double f0, const Eigen::VectorXd& g0,
                 const Eigen::VectorXd& dir, double step, LinePoint& out) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const double d0 = g0.dot(dir);

  auto eval = [&](double a) {
    LinePoint p;
    p.step = a;
    p.x = x0 + a * dir;
    p.f = problem(p.x, p.grad);
    return p;
  };
  auto slope = [&](const LinePoint& p) { return p.grad.dot(dir); };
  auto armijo = [&](const LinePoint& p) { return std::isfinite(p.f) && p.f <= f0 + c1 * p.step * d0; };

  auto zoom = [&](LinePoint lo, LinePoint hi) {
    LinePoint best = lo;
    for (int it = 0; it < 60; ++it) {
      const double a_lo = lo.step, a_hi = hi.step;
      double a = 0.5 * (a_lo + a_hi);
      if (std::isfinite(hi.f) && lo.step >= 0) {
        const double h = a_hi - a_lo;
        const double dlo = lo.step == 0 ? d0 : slope(lo);
        const double denom = 2.0 * (hi.f - lo.f - dlo * h);
        if (denom > 0) {
          const double q = a_lo - dlo * h * h / denom;
          const double lo_b = std::min(a_lo, a_hi) + 0.1 * std::abs(h);
          const double hi_b = std::max(a_lo, a_hi) - 0.1 * std::abs(h);
          if (q > lo_b && q < hi_b) a = q;
        }
      }
      LinePoint p = eval(a);
      if (!armijo(p) || p.f >= lo.f) {
        hi = p;
      } else {
        best = p;
        const double s = slope(p);
        if (std::abs(s) <= -c2 * d0) return p;
        if (s * (hi.step - lo.step) >= 0) hi = lo;
        lo = p;
      }
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
    }
    return best;
  };

  LinePoint prev;
  prev.step = 0.0;
  prev.f = f0;
  prev.x = x0;
  prev.grad = g0;
  for (int i = 0; i < 40; ++i) {
    LinePoint p = eval(step);
    if (!armijo(p) || (i > 0 && p.f >= prev.f)) {
      out = zoom(prev, p);
      return out.step > 0;
    }
    const double s = slope(p);
    if (std::abs(s) <= -c2 * d0) {
      out = p;
      return true;
    }
    if (s >= 0) {
      out = zoom(p, prev);
      return out.step > 0;
    }
    prev = p;
    step *= 2.0;
  }
  out = prev;
  return prev.step > 0;
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Newton steps with a central-difference Hessian of the analytic gradient.
void newton_polish(Problem& problem, Eigen::VectorXd& x, double& f, Eigen::VectorXd& g,
                   const OptimizerControls& controls, int& iterations) {
  const auto n = x.size();
  for (int it = 0; it < 30 && sup_norm(g) >= controls.gradient_tolerance; ++it) {
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd gp, gm;
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      ok = std::isfinite(problem(xp, gp)) && std::isfinite(problem(xm, gm));
      if (ok) hess.col(i) = (gp - gm) / (2.0 * h);
    }
    if (!ok) return;
    hess = 0.5 * (hess + hess.transpose()).eval();
    // Levenberg damping until the Hessian is positive definite.
    double damping = 0.0;
    Eigen::VectorXd step;
    for (int tries = 0; tries < 20; ++tries) {
      Eigen::LLT<Eigen::MatrixXd> llt(hess + damping * Eigen::MatrixXd::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        step = -llt.solve(g);
        break;
      }
      damping = damping == 0.0 ? 1e-8 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff()) : damping * 10.0;
    }
    if (step.size() != n) return;
    bool improved = false;
    for (double a = 1.0; a > 1e-6; a *= 0.5) {
      Eigen::VectorXd xn = x + a * step, gn;
      const double fn = problem(xn, gn);
      if (std::isfinite(fn) && (fn < f || (fn <= f + 1e-12 * std::abs(f) && sup_norm(gn) < sup_norm(g)))) {
        x = xn;
        f = fn;
        g = gn;
        improved = true;
        break;
      }
    }
    ++iterations;
    if (!improved) return;
  }
}

}  // namespace

OptimizeResult maximize_bfgs(const Objective& objective, Eigen::VectorXd start, const OptimizerControls& controls) {
  Problem problem{objective};
  const auto n = start.size();
  OptimizeResult result;
  Eigen::VectorXd x = std::move(start), g;
  double f = problem(x, g);
  if (!std::isfinite(f)) throw NumericalError("objective is not finite at the starting point");

  Eigen::MatrixXd inv_hess = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int it = 0;
  int small_changes = 0;
  for (; it < controls.max_iterations; ++it) {
    if (sup_norm(g) < controls.gradient_tolerance) break;
    Eigen::VectorXd dir = -inv_hess * g;
    if (g.dot(dir) >= 0) {
      inv_hess.setIdentity();
      dir = -g;
    }
    const double step0 = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(sup_norm(g), 1e-12));
    LinePoint next;
    if (!line_search(problem, x, f, g, dir, step0, next)) {
      if (scaled) {  // retry once along steepest descent with a fresh scaling
        inv_hess.setIdentity();
        scaled = false;
        continue;
      }
      break;
    }
    const Eigen::VectorXd s = next.x - x;
    const Eigen::VectorXd y = next.grad - g;
    const double rel = std::abs(next.f - f) / std::max(1.0, std::abs(f));
    x = next.x;
    f = next.f;
    g = next.grad;
    small_changes = rel < controls.relative_tolerance ? small_changes + 1 : 0;
    if (small_changes >= 3) break;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hess = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_hess * y;
      inv_hess += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (controls.newton_polish && sup_norm(g) >= controls.gradient_tolerance) {
    newton_polish(problem, x, f, g, controls, it);
  }

  result.x = std::move(x);
  result.value = -f;
  result.gradient = -g;
  result.gradient_norm = sup_norm(g);
  result.iterations = it;
  result.converged = result.gradient_norm < controls.gradient_tolerance;
  return result;
}

}  // namespace ascertain
