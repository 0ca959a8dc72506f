#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace cybergen::control {

struct BoxBfgsOptions {
  int max_iterations = 200;
  double pg_tol = 1e-7;         // infinity norm of the projected gradient
  double ftol = 1e-10;          // relative decrease below which progress has stalled
  int stall_iterations = 3;     // consecutive stalled iterations before stopping
  double fd_step = 1e-6;        // relative forward-difference step
  double armijo = 1e-4;
  int max_backtracks = 30;
};

struct BoxBfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string status;  // "gradient", "ftol", "max_iterations", "line_search"
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Writes the gradient at x given f(x). Defaults to forward differences.
using Gradient = std::function<void(const Eigen::VectorXd& x, double fx, Eigen::VectorXd& g)>;

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Forward differences with step fd_step * max(1, |x_i|); steps that would
/// leave the box are taken backwards instead.
void fd_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& lo,
                 const Eigen::VectorXd& hi, double rel_step, Eigen::VectorXd& g);

/// Minimizes f over lo <= x <= hi with a projected quasi-Newton method:
/// inverse BFGS on the free variables, projected Armijo backtracking.
BoxBfgsResult minimize_box(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const BoxBfgsOptions& opts = {},
                           const Gradient& gradient = {});

}  // namespace cybergen::control
