#include "cybergen/control/box_bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cybergen::control {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

void fd_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& lo,
                 const Eigen::VectorXd& hi, double rel_step, Eigen::VectorXd& g) {
  g.resize(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = rel_step * std::max(1.0, std::abs(x[i]));
    if (x[i] + h > hi[i]) h = -h;
    if (x[i] + h < lo[i]) {
      g[i] = 0.0;  // degenerate box
      continue;
    }
    xp[i] = x[i] + h;
    g[i] = (f(xp) - fx) / h;
    xp[i] = x[i];
  }
}

namespace {

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
  if (x.size() == 0) return 0.0;
  return (project(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

BoxBfgsResult minimize_box(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const BoxBfgsOptions& opts, const Gradient& gradient) {
  const Eigen::Index n = x0.size();
  if (lo.size() != n || hi.size() != n) throw std::invalid_argument("bounds have the wrong size");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("lower bound above upper bound");

  BoxBfgsResult r;
  int evals = 0;
  const Objective counted = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  auto grad = [&](const Eigen::VectorXd& x, double fx, Eigen::VectorXd& g) {
    if (gradient) {
      gradient(x, fx, g);
    } else {
      fd_gradient(counted, x, fx, lo, hi, opts.fd_step, g);
    }
  };

  Eigen::VectorXd x = project(x0, lo, hi);
  double fx = counted(x);
  if (!std::isfinite(fx)) throw std::runtime_error("objective is not finite at the starting point");
  Eigen::VectorXd g, gn, d(n), xn(n);
  grad(x, fx, g);

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  int stall = 0;
  r.status = "max_iterations";
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (projected_gradient_norm(x, g, lo, hi) < opts.pg_tol) {
      r.status = "gradient";
      break;
    }
    auto is_active = [&](Eigen::Index i) { return (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0); };
    d = -H * g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (is_active(i)) d[i] = 0.0;
    if (g.dot(d) >= 0.0) {
      H.setIdentity();
      fresh = true;
      d = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (is_active(i)) d[i] = 0.0;
    }
    double alpha = 1.0;
    if (fresh) {
      // keep a steepest-descent step inside one box width
      double span = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (d[i] != 0.0 && std::isfinite(hi[i] - lo[i])) span = std::max(span, hi[i] - lo[i]);
      const double dmax = d.lpNorm<Eigen::Infinity>();
      if (span > 0.0 && dmax > span) alpha = span / dmax;
    }

    bool accepted = false;
    double fn = fx;
    for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
      xn = project(x + alpha * d, lo, hi);
      if (xn == x) break;
      fn = counted(xn);
      if (std::isfinite(fn) && fn <= fx + opts.armijo * g.dot(xn - x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      r.status = "line_search";
      break;
    }

    grad(xn, fn, gn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double decrease = (fx - fn) / std::max(1.0, std::abs(fx));
    stall = decrease < opts.ftol ? stall + 1 : 0;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      // inverse BFGS update written out to avoid forming (I - rho s y')
      H += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
      fresh = false;
    }
    x = xn;
    fx = fn;
    g = gn;
    if (stall >= opts.stall_iterations) {
      r.status = "ftol";
      ++it;
      break;
    }
  }
  r.x = x;
  r.f = fx;
  r.pg_norm = projected_gradient_norm(x, g, lo, hi);
  r.iterations = it;
  r.evaluations = evals;
  return r;
}

}  // namespace cybergen::control
