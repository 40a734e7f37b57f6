#pragma once

// Dense two-phase simplex for small linear programs in standard form
//   minimize c'x  subject to  A x = b,  x >= 0.
// Bland's rule throughout, so it terminates on degenerate problems.

#include <Eigen/Core>

namespace lrvi {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  // Optimal phase-one objective: the total constraint violation that could
  // not be removed (0 when feasible).
  double infeasibility = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double tol = 1e-8;
  int max_iterations = 200000;
};

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  const LpOptions& options = {});

}  // namespace lrvi
