#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cybergen::model {

/// Raised when the state becomes non-finite or clearly negative.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

struct OdeSystem {
  std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx)> rhs;
  /// Optional bound on the magnitude of the fastest local decay rate (1/h).
  /// Steps with dt * rate above the stability limit are split into substeps.
  std::function<double(const Eigen::VectorXd& x)> stiffness;
};

struct IntegratorOptions {
  double dt = 0.01;               // h
  bool nonnegative = false;       // apply the negativity guard
  double negative_tol = 1e-10;    // components in (-tol, 0) snap to 0
  double stability_limit = 2.0;   // max dt * stiffness per RK4 substep
  int max_halvings = 12;          // retries before giving up on a step
};

/// Classical fourth-order Runge-Kutta with deterministic substepping.
///
/// Each step is split into ceil(dt * stiffness / limit) equal substeps. If a
/// step still produces a non-finite value, or a component below -tol with
/// the guard on, it is redone as two half steps, recursively.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(Eigen::Index n);

  /// Advances x from t0 to t1 in place.
  void advance(const OdeSystem& sys, double t0, double t1, Eigen::VectorXd& x, const IntegratorOptions& opts);

 private:
  void substeps(const OdeSystem& sys, double t0, double t1, int count, Eigen::VectorXd& x);
  void step(const OdeSystem& sys, double t0, double t1, Eigen::VectorXd& x, const IntegratorOptions& opts, int depth);

  Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
  std::vector<Eigen::VectorXd> backup_;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

/// Integrates from t0 to t1 with round((t1 - t0) / dt) equal steps and
/// records the state after every step (plus the initial state).
Trajectory integrate(const OdeSystem& sys, const Eigen::VectorXd& x0, double t0, double t1,
                     const IntegratorOptions& opts = {});

}  // namespace cybergen::model
