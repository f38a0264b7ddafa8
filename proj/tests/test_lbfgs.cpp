#include <cmath>
#include <limits>

#include "doctest.h"
#include "mvbf/lbfgs.hpp"
#include "mvbf/rng.hpp"

using namespace mvbf;

namespace {

void check_monotone(const LbfgsResult& result, double f0) {
  double prev = f0;
  for (const auto& it : result.trace) {
    CHECK(it.objective <= prev + 1e-15);
    prev = it.objective;
  }
}

}  // namespace

TEST_SUITE("lbfgs") {

TEST_CASE("solves an SPD quadratic to high accuracy") {
  RandomStream rng(301);
  const int n = 10;
  MatX m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = 2 * rng.uniform01() - 1;
  const MatX a = m.transpose() * m + 0.5 * MatX::Identity(n, n);  // SPD
  VecX b(n);
  for (int i = 0; i < n; ++i) b[i] = 2 * rng.uniform01() - 1;

  const auto objective = [&](const VecX& x, VecX* grad) {
    if (grad) *grad = a * x - b;
    return 0.5 * x.dot(a * x) - b.dot(x);
  };

  LbfgsOptions opts;
  opts.max_iterations = 300;
  opts.gradient_tolerance = 1e-10;
  const VecX x0 = VecX::Ones(n);
  const LbfgsResult result = lbfgs_minimize(objective, x0, opts);
  const VecX expected = a.ldlt().solve(b);
  CHECK(result.status == LbfgsStatus::converged);
  CHECK((result.x - expected).norm() < 1e-8);
  check_monotone(result, objective(x0, nullptr));
}

TEST_CASE("solves Rosenbrock from the classic start") {
  const auto objective = [](const VecX& x, VecX* grad) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (grad) {
      (*grad)[0] = -2 * a - 400 * x[0] * b;
      (*grad)[1] = 200 * b;
    }
    return a * a + 100 * b * b;
  };
  LbfgsOptions opts;
  opts.max_iterations = 200;
  opts.gradient_tolerance = 1e-10;
  VecX x0(2);
  x0 << -1.2, 1.0;
  const LbfgsResult result = lbfgs_minimize(objective, x0, opts);
  CHECK(result.status == LbfgsStatus::converged);
  CHECK(static_cast<int>(result.trace.size()) <= 200);
  CHECK(std::abs(result.x[0] - 1.0) < 1e-6);
  CHECK(std::abs(result.x[1] - 1.0) < 1e-6);
  check_monotone(result, objective(x0, nullptr));
}

TEST_CASE("already optimal start returns immediately with zero iterations") {
  const auto objective = [](const VecX& x, VecX* grad) {
    if (grad) *grad = 2 * x;
    return x.squaredNorm();
  };
  const LbfgsResult result = lbfgs_minimize(objective, VecX::Zero(5), {});
  CHECK(result.status == LbfgsStatus::converged);
  CHECK(result.trace.empty());
  CHECK(result.evaluations == 1);
}

TEST_CASE("constant shift leaves the iterates unchanged") {
  const auto make_objective = [](double shift) {
    return [shift](const VecX& x, VecX* grad) {
      const double a = 1.0 - x[0];
      const double b = x[1] - x[0] * x[0];
      if (grad) {
        (*grad)[0] = -2 * a - 400 * x[0] * b;
        (*grad)[1] = 200 * b;
      }
      return a * a + 100 * b * b + shift;
    };
  };
  VecX x0(2);
  x0 << -0.7, 2.0;
  LbfgsOptions opts;
  opts.max_iterations = 150;
  const LbfgsResult plain = lbfgs_minimize(make_objective(0.0), x0, opts);
  const LbfgsResult shifted = lbfgs_minimize(make_objective(123.456), x0, opts);
  CHECK((plain.x - shifted.x).norm() == 0.0);
  REQUIRE(plain.trace.size() == shifted.trace.size());
  for (std::size_t i = 0; i < plain.trace.size(); ++i) {
    CHECK(plain.trace[i].step_length == shifted.trace[i].step_length);
    CHECK(plain.trace[i].gradient_norm == shifted.trace[i].gradient_norm);
    CHECK(shifted.trace[i].objective ==
          doctest::Approx(plain.trace[i].objective + 123.456).epsilon(1e-12));
  }
}

TEST_CASE("iteration cap is reported distinctly") {
  const auto objective = [](const VecX& x, VecX* grad) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (grad) {
      (*grad)[0] = -2 * a - 400 * x[0] * b;
      (*grad)[1] = 200 * b;
    }
    return a * a + 100 * b * b;
  };
  LbfgsOptions opts;
  opts.max_iterations = 3;
  VecX x0(2);
  x0 << -1.2, 1.0;
  const LbfgsResult result = lbfgs_minimize(objective, x0, opts);
  CHECK(result.status == LbfgsStatus::max_iterations);
  CHECK(result.trace.size() == 3);
}

TEST_CASE("non-finite start throws with diagnostics") {
  const auto objective = [](const VecX& x, VecX* grad) {
    if (grad) grad->setZero();
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(lbfgs_minimize(objective, VecX::Zero(2), {}), NumericalError);
}

TEST_CASE("non-smooth valley ends as line search failure, not divergence") {
  // |x| has no Wolfe point near 0 once bracketed at machine precision.
  const auto objective = [](const VecX& x, VecX* grad) {
    if (grad) (*grad)[0] = x[0] >= 0 ? 1.0 : -1.0;
    return std::abs(x[0]);
  };
  LbfgsOptions opts;
  opts.max_iterations = 100;
  VecX x0(1);
  x0 << 1.0;
  const LbfgsResult result = lbfgs_minimize(objective, x0, opts);
  CHECK(result.objective <= 1.0);
  check_monotone(result, 1.0);
}

}  // TEST_SUITE
