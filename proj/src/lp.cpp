#include "lrvi/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "lrvi/errors.hpp"

namespace lrvi {

namespace {

// Tableau with m constraint rows and one objective row (last). Column n_cols
// holds the right-hand side.
struct Tableau {
  Eigen::MatrixXd t;
  std::vector<int> basis;
  int cols = 0;

  double& rhs(int r) { return t(r, cols); }

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (r != row && t(r, col) != 0.0) t.row(r) -= t(r, col) * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
  }

  // Minimizes the objective row over columns [0, allowed). Returns false when
  // unbounded.
  bool run(int allowed, double tol, int max_iterations, int& iterations) {
    const int m = static_cast<int>(basis.size());
    const int obj = m;
    while (true) {
      if (++iterations > max_iterations) throw ComputationError("simplex: iteration limit reached");
      int enter = -1;
      for (int j = 0; j < allowed; ++j) {
        if (t(obj, j) < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        if (t(r, enter) > tol) {
          const double ratio = t(r, cols) / t(r, enter);
          if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && basis[r] < basis[leave])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }
};

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  const LpOptions& options) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (b.size() != m || c.size() != n) throw DomainError("solve_lp: dimension mismatch");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) throw DomainError("solve_lp: non-finite input");

  Tableau tab;
  tab.cols = n + m;
  tab.t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    const double s = b(r) < 0.0 ? -1.0 : 1.0;
    tab.t.row(r).head(n) = s * a.row(r);
    tab.t(r, n + r) = 1.0;
    tab.rhs(r) = s * b(r);
    tab.basis[static_cast<std::size_t>(r)] = n + r;
  }
  // Phase one: minimize the sum of artificials.
  for (int r = 0; r < m; ++r) tab.t.row(m) -= tab.t.row(r);
  for (int r = 0; r < m; ++r) tab.t(m, n + r) = 0.0;

  LpResult out;
  tab.run(n + m, options.tol, options.max_iterations, out.iterations);
  out.infeasibility = -tab.t(m, tab.cols);
  if (out.infeasibility > options.tol) {
    out.status = LpStatus::kInfeasible;
    return out;
  }
  // Drive remaining artificials out of the basis; rows where that is
  // impossible are redundant.
  for (int r = 0; r < m; ++r) {
    if (tab.basis[static_cast<std::size_t>(r)] < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab.t(r, j)) > options.tol) {
        tab.pivot(r, j);
        break;
      }
    }
  }
  // Phase two objective row: c minus the basic combination.
  tab.t.row(m).setZero();
  tab.t.row(m).head(n) = c.transpose();
  for (int r = 0; r < m; ++r) {
    const int j = tab.basis[static_cast<std::size_t>(r)];
    if (j < n && c(j) != 0.0) tab.t.row(m) -= c(j) * tab.t.row(r);
  }
  if (!tab.run(n, options.tol, options.max_iterations, out.iterations)) {
    out.status = LpStatus::kUnbounded;
    return out;
  }
  out.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int j = tab.basis[static_cast<std::size_t>(r)];
    if (j < n) out.x(j) = std::max(0.0, tab.rhs(r));
  }
  out.objective = c.dot(out.x);
  out.status = LpStatus::kOptimal;
  return out;
}

}  // namespace lrvi
