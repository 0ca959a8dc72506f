#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cybergen/control/box_bfgs.hpp"
#include "cybergen/model/hybrid_model.hpp"

namespace cybergen::control {

/// Terminal functional to maximize, evaluated on the state at t_f.
using TerminalObjective = std::function<double(const Eigen::VectorXd& x_final)>;

/// g(t, x) <= 0, enforced by a quadratic penalty at every interval edge.
struct PathConstraint {
  std::string name;
  std::function<double(double t, const Eigen::VectorXd& x)> g;
};

struct ControlProblem {
  model::HybridModelSpec model;  // the controller's model
  double t0 = 0.0;
  double tf = 24.0;
  std::size_t n_intervals = 24;
  double u_min = 0.0;
  double u_max = 5.0;
  TerminalObjective objective;  // empty: final itaconate titer
  std::vector<PathConstraint> path_constraints;
  double penalty_weight = 1e4;

  /// Treat the initial state as a decision within [x0_lower, x0_upper].
  /// Components whose bounds coincide stay fixed.
  bool optimize_initial_state = false;
  Eigen::VectorXd x0_lower, x0_upper;

  model::IntegratorOptions integrator = model::HybridModel::default_options();
  BoxBfgsOptions solver;
  unsigned threads = 0;  // multi-start workers, 0 = hardware concurrency

  void validate() const;
  std::vector<double> edges() const;
  double evaluate_objective(const Eigen::VectorXd& x_final) const;
};

struct StartReport {
  std::string name;
  bool ok = false;
  double objective = 0.0;
  int iterations = 0;
  std::string status;  // optimizer status or the error message
};

struct OcpSolution {
  model::InputProfile profile;  // intervals first_interval..n_intervals-1
  double objective = 0.0;       // terminal functional of the re-simulated profile
  double penalty = 0.0;
  Eigen::VectorXd x0;           // initial state used, optimized when requested
  Eigen::VectorXd final_state;
  int iterations = 0;
  std::string best_start;
  std::vector<StartReport> starts;
};

class OcpError : public std::runtime_error {
 public:
  OcpError(const std::string& what, std::vector<StartReport> starts)
      : std::runtime_error(what), starts_(std::move(starts)) {}
  const std::vector<StartReport>& starts() const { return starts_; }

 private:
  std::vector<StartReport> starts_;
};

/// Direct single shooting over the remaining piecewise-constant inputs,
/// starting from x0 at the edge of interval `first_interval`. Starts are the
/// given guesses, the best switch-time profile, all-min and all-max; the best
/// local optimum wins, ties going to the earlier start.
OcpSolution solve_ocp(const ControlProblem& problem, const Eigen::VectorXd& x0, std::size_t first_interval = 0,
                      const std::vector<Eigen::VectorXd>& guesses = {});

/// Best of the profiles "u_min before interval k, u_max from k on" for every
/// k in [first_interval, n_intervals]. Single input channel only.
OcpSolution switch_time_oracle(const ControlProblem& problem, const Eigen::VectorXd& x0,
                               std::size_t first_interval = 0);

/// Simulated terminal objective and penalty for a remaining-horizon profile.
double simulate_objective(const ControlProblem& problem, const Eigen::VectorXd& x0, std::size_t first_interval,
                          const Eigen::VectorXd& inputs, Eigen::VectorXd* final_state = nullptr,
                          double* penalty = nullptr);

/// Index of the first interval whose input reaches the midpoint of the
/// bounds; the interval count when there is none.
std::size_t switch_interval(const Eigen::VectorXd& inputs, double u_min, double u_max);

}  // namespace cybergen::control
