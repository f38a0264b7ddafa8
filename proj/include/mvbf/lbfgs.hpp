#pragma once

#include <functional>
#include <vector>

#include "mvbf/types.hpp"

namespace mvbf {

struct LbfgsOptions {
  int history = 10;               // m
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  // Strong Wolfe constants.
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 50;
};

enum class LbfgsStatus { converged, max_iterations, line_search_failed };

const char* lbfgs_status_name(LbfgsStatus s);

struct LbfgsIterate {
  int iteration = 0;
  double objective = 0;
  double gradient_norm = 0;
  double step_length = 0;
};

struct LbfgsResult {
  VecX x;
  double objective = 0;
  double gradient_norm = 0;
  LbfgsStatus status = LbfgsStatus::converged;
  std::vector<LbfgsIterate> trace;  // one entry per accepted iteration
  int evaluations = 0;
};

// objective(x, grad): returns f(x); fills grad (same size as x) when non-null.
using LbfgsObjective = std::function<double(const VecX&, VecX*)>;

// Two-loop-recursion L-BFGS with a strong Wolfe line search. Accepted
// objective values are non-increasing. Throws NumericalError when the
// objective or gradient is non-finite at the start point or at an accepted
// iterate; non-finite trial points during line search shrink the step.
LbfgsResult lbfgs_minimize(const LbfgsObjective& objective, VecX x0,
                           const LbfgsOptions& opts = {});

}  // namespace mvbf
