#pragma once

#include <cmath>
#include <stdexcept>

namespace mvbf {

enum class RobustKind { none, geman_mcclure, huber };

// rho and its parameter. `param` is c for Geman-McClure, delta for Huber,
// ignored for none. Arguments are whitened residual magnitudes.
struct RobustEstimator {
  RobustKind kind = RobustKind::none;
  double param = 1.0;

  static RobustEstimator none() { return {RobustKind::none, 1.0}; }
  static RobustEstimator geman_mcclure(double c) {
    if (!(c > 0)) throw std::invalid_argument("geman_mcclure: c must be > 0");
    return {RobustKind::geman_mcclure, c};
  }
  static RobustEstimator huber(double delta) {
    if (!(delta > 0)) throw std::invalid_argument("huber: delta must be > 0");
    return {RobustKind::huber, delta};
  }
};

// Scalar reference forms. The SIMD kernels mirror these expression trees
// exactly; keep any change in sync with kernels_scalar.cpp / kernels_avx2.cpp.
inline double robust(double x, const RobustEstimator& est) {
  switch (est.kind) {
    case RobustKind::none:
      return x * x;
    case RobustKind::geman_mcclure: {
      const double c2 = est.param * est.param;
      const double x2 = x * x;
      return (c2 * x2) / (x2 + c2);
    }
    case RobustKind::huber: {
      const double d = est.param;
      const double ax = std::fabs(x);
      if (ax <= d) return 0.5 * (x * x);
      return d * (ax - 0.5 * d);
    }
  }
  return 0.0;
}

inline double robust_deriv(double x, const RobustEstimator& est) {
  switch (est.kind) {
    case RobustKind::none:
      return 2.0 * x;
    case RobustKind::geman_mcclure: {
      const double c2 = est.param * est.param;
      const double x2 = x * x;
      const double t = x2 + c2;
      return (2.0 * c2 * c2 * x) / (t * t);
    }
    case RobustKind::huber: {
      const double d = est.param;
      if (std::fabs(x) <= d) return x;
      return x < 0 ? -d : d;
    }
  }
  return 0.0;
}

}  // namespace mvbf
