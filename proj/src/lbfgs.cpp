#include "mvbf/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace mvbf {

const char* lbfgs_status_name(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::converged: return "converged";
    case LbfgsStatus::max_iterations: return "max_iterations";
    case LbfgsStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

struct LineSearchResult {
  bool ok = false;
  double alpha = 0;
  double f = 0;
  VecX g;
  int evals = 0;
};

// Strong Wolfe line search, Nocedal & Wright Alg. 3.5/3.6 with bisection in
// zoom. phi(a) = f(x + a d). Non-finite trial values shrink the bracket.
LineSearchResult wolfe_line_search(const LbfgsObjective& objective, const VecX& x,
                                   const VecX& d, double f0, double dphi0,
                                   double alpha_init, const LbfgsOptions& opts) {
  LineSearchResult out;
  out.g.resize(x.size());
  VecX trial(x.size());

  auto eval = [&](double a, double& f, double& dphi) {
    trial = x + a * d;
    f = objective(trial, &out.g);
    ++out.evals;
    dphi = out.g.dot(d);
  };
  auto armijo = [&](double a, double f) { return f <= f0 + opts.c1 * a * dphi0; };

  auto zoom = [&](double lo, double f_lo, double hi) -> bool {
    for (int i = 0; i < opts.max_line_search_evals && out.evals < opts.max_line_search_evals; ++i) {
      const double a = 0.5 * (lo + hi);
      double f, dphi;
      eval(a, f, dphi);
      if (!std::isfinite(f) || !armijo(a, f) || f >= f_lo) {
        hi = a;
      } else {
        if (std::abs(dphi) <= -opts.c2 * dphi0) {
          out.ok = true;
          out.alpha = a;
          out.f = f;
          return true;
        }
        if (dphi * (hi - lo) >= 0) hi = lo;
        lo = a;
        f_lo = f;
      }
      if (std::abs(hi - lo) <= 1e-12 * std::max(1.0, std::abs(lo))) break;
    }
    // Bracket collapsed: fall back to the best sufficient-decrease point.
    if (lo > 0 && armijo(lo, f_lo)) {
      double f, dphi;
      eval(lo, f, dphi);
      out.ok = true;
      out.alpha = lo;
      out.f = f;
      return true;
    }
    return false;
  };

  double a_prev = 0, f_prev = f0;
  double a = alpha_init;
  for (int i = 0; i < opts.max_line_search_evals && out.evals < opts.max_line_search_evals; ++i) {
    double f, dphi;
    eval(a, f, dphi);
    if (!std::isfinite(f) || !armijo(a, f) || (i > 0 && f >= f_prev))
      return zoom(a_prev, f_prev, a), out;
    if (std::abs(dphi) <= -opts.c2 * dphi0) {
      out.ok = true;
      out.alpha = a;
      out.f = f;
      return out;
    }
    if (dphi >= 0) return zoom(a, f, a_prev), out;
    a_prev = a;
    f_prev = f;
    a = std::min(2.0 * a, 1e12);
  }
  return out;
}

}  // namespace

LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, VecX x0,
                           const LbfgsOptions& opts) {
  LbfgsResult result;
  const auto n = x0.size();
  VecX g(n);
  double f = objective(x0, &g);
  result.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite())
    throw NumericalError("lbfgs: non-finite objective or gradient at the start point");

  result.x = std::move(x0);
  result.objective = f;
  result.gradient_norm = g.norm();
  if (result.gradient_norm <= opts.gradient_tolerance) {
    result.status = LbfgsStatus::converged;
    return result;  // already optimal, zero iterations
  }

  std::deque<VecX> s_hist, y_hist;
  std::deque<double> rho_hist;
  VecX q(n), d(n);
  std::vector<double> alpha_buf;

  result.status = LbfgsStatus::max_iterations;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    // Two-loop recursion for d = -H g.
    q = g;
    const int m = static_cast<int>(s_hist.size());
    alpha_buf.assign(m, 0.0);
    for (int i = m - 1; i >= 0; --i) {
      alpha_buf[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha_buf[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_buf[i] - beta) * s_hist[i];
    }
    d = -q;

    double dphi0 = g.dot(d);
    if (!(dphi0 < 0)) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      dphi0 = g.dot(d);
    }

    const double alpha_init =
        s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.norm())) : 1.0;
    LineSearchResult ls =
        wolfe_line_search(objective, result.x, d, f, dphi0, alpha_init, opts);
    result.evaluations += ls.evals;
    if (!ls.ok) {
      result.status = LbfgsStatus::line_search_failed;
      break;
    }
    if (!std::isfinite(ls.f) || !ls.g.allFinite())
      throw NumericalError("lbfgs: non-finite value at accepted iterate " +
                           std::to_string(iter));

    const VecX step = ls.alpha * d;
    const VecX y = ls.g - g;
    const double sy = step.dot(y);
    if (sy > 1e-10 * step.norm() * y.norm()) {
      s_hist.push_back(step);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    result.x += step;
    f = ls.f;
    g = ls.g;
    result.objective = f;
    result.gradient_norm = g.norm();
    result.trace.push_back({iter, f, result.gradient_norm, ls.alpha});

    if (result.gradient_norm <= opts.gradient_tolerance) {
      result.status = LbfgsStatus::converged;
      break;
    }
  }
  return result;
}

}  // namespace mvbf
