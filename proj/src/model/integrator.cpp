#include "cybergen/model/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace cybergen::model {

Rk4Stepper::Rk4Stepper(Eigen::Index n)
    : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

void Rk4Stepper::substeps(const OdeSystem& sys, double t0, double t1, int count, Eigen::VectorXd& x) {
  const double h = (t1 - t0) / count;
  for (int i = 0; i < count; ++i) {
    const double t = t0 + h * i;
    sys.rhs(t, x, k1_);
    tmp_ = x + 0.5 * h * k1_;
    sys.rhs(t + 0.5 * h, tmp_, k2_);
    tmp_ = x + 0.5 * h * k2_;
    sys.rhs(t + 0.5 * h, tmp_, k3_);
    tmp_ = x + h * k3_;
    sys.rhs(t + h, tmp_, k4_);
    x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }
}

void Rk4Stepper::step(const OdeSystem& sys, double t0, double t1, Eigen::VectorXd& x, const IntegratorOptions& opts,
                      int depth) {
  if (backup_.size() <= static_cast<std::size_t>(depth)) backup_.resize(depth + 1);
  Eigen::VectorXd& saved = backup_[depth];
  saved = x;

  int count = 1;
  if (sys.stiffness) {
    const double rate = sys.stiffness(x);
    if (std::isfinite(rate) && rate > 0.0) {
      const double n = std::ceil((t1 - t0) * rate / opts.stability_limit);
      count = static_cast<int>(std::clamp(n, 1.0, 1e6));
    }
  }
  substeps(sys, t0, t1, count, x);

  bool ok = x.allFinite();
  if (ok && opts.nonnegative) ok = x.minCoeff() >= -opts.negative_tol;
  if (ok) {
    if (opts.nonnegative)
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < 0.0) x[i] = 0.0;
    return;
  }
  if (depth >= opts.max_halvings)
    throw IntegrationError(x.allFinite() ? "state became negative" : "state became non-finite", t0);
  x = backup_[depth];
  const double mid = 0.5 * (t0 + t1);
  step(sys, t0, mid, x, opts, depth + 1);
  step(sys, mid, t1, x, opts, depth + 1);
}

void Rk4Stepper::advance(const OdeSystem& sys, double t0, double t1, Eigen::VectorXd& x,
                         const IntegratorOptions& opts) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("integrator step must be > 0");
  if (!(t1 > t0)) return;
  const long n = std::max(1L, std::lround((t1 - t0) / opts.dt));
  const double h = (t1 - t0) / static_cast<double>(n);
  for (long i = 0; i < n; ++i) {
    const double a = t0 + h * static_cast<double>(i);
    const double b = (i + 1 == n) ? t1 : t0 + h * static_cast<double>(i + 1);
    step(sys, a, b, x, opts, 0);
  }
}

Trajectory integrate(const OdeSystem& sys, const Eigen::VectorXd& x0, double t0, double t1,
                     const IntegratorOptions& opts) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("integrator step must be > 0");
  if (!(t1 > t0)) throw std::invalid_argument("integration needs t1 > t0");
  Rk4Stepper stepper(x0.size());
  Trajectory out;
  const long n = std::max(1L, std::lround((t1 - t0) / opts.dt));
  const double h = (t1 - t0) / static_cast<double>(n);
  out.t.reserve(n + 1);
  out.x.reserve(n + 1);
  Eigen::VectorXd x = x0;
  out.t.push_back(t0);
  out.x.push_back(x);
  for (long i = 0; i < n; ++i) {
    const double a = t0 + h * static_cast<double>(i);
    const double b = (i + 1 == n) ? t1 : t0 + h * static_cast<double>(i + 1);
    IntegratorOptions one = opts;
    one.dt = b - a;
    stepper.advance(sys, a, b, x, one);
    out.t.push_back(b);
    out.x.push_back(x);
  }
  return out;
}

}  // namespace cybergen::model
