#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace cybergen::fba {

enum class LpStatus { optimal, infeasible, unbounded };

const char* to_string(LpStatus s);

/// minimize c'x  subject to  A x = b,  lower <= x <= upper.
/// Bounds may be infinite.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct SimplexOptions {
  int max_iterations = 0;  // 0: 50 * (rows + cols) + 1000
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-11;
  /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
  int degenerate_limit = 25;
  int refactor_every = 32;
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

/// The iteration budget ran out or the basis became singular.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-phase bounded-variable revised simplex with an explicit dense basis
/// inverse. Pricing is Dantzig's rule; after `degenerate_limit` consecutive
/// degenerate pivots it falls back to Bland's rule until progress resumes.
LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace cybergen::fba
