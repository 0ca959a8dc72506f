#include "cybergen/control/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "cybergen/parallel.hpp"

namespace cybergen::control {

using model::HybridModel;

void ControlProblem::validate() const {
  if (!(tf > t0)) throw std::invalid_argument("control horizon needs tf > t0");
  if (n_intervals < 1) throw std::invalid_argument("control horizon needs at least one interval");
  if (!(u_min <= u_max) || u_min < 0.0) throw std::invalid_argument("input bounds need 0 <= u_min <= u_max");
  if (!(penalty_weight >= 0.0)) throw std::invalid_argument("penalty weight must be >= 0");
  if (optimize_initial_state && (x0_lower.size() == 0 || x0_lower.size() != x0_upper.size() ||
                                 (x0_lower.array() > x0_upper.array()).any()))
    throw std::invalid_argument("initial-state bounds are missing or inconsistent");
}

std::vector<double> ControlProblem::edges() const {
  std::vector<double> e(n_intervals + 1);
  const double w = (tf - t0) / static_cast<double>(n_intervals);
  for (std::size_t i = 0; i <= n_intervals; ++i) e[i] = t0 + w * static_cast<double>(i);
  e.back() = tf;
  return e;
}

double ControlProblem::evaluate_objective(const Eigen::VectorXd& x_final) const {
  return objective ? objective(x_final) : x_final[HybridModel::kIta];
}

namespace {

// Single-shooting evaluator for one start. Keeps the states at every interval
// edge of the last evaluation so a gradient entry for interval j only
// re-simulates from edge j on.
class Shooter {
 public:
  Shooter(const ControlProblem& p, const HybridModel& m, const Eigen::VectorXd& x0, std::size_t first)
      : p_(p), m_(m), x0_(x0), first_(first), edges_(p.edges()), channels_(m.enzymes()),
        remaining_(static_cast<Eigen::Index>(p.n_intervals - first)), stepper_(m.state_size()) {
    if (p.optimize_initial_state && first == 0)
      for (Eigen::Index i = 0; i < x0.size(); ++i)
        if (p.x0_lower[i] < p.x0_upper[i]) free_state_.push_back(i);
  }

  Eigen::Index input_size() const { return remaining_ * channels_; }
  Eigen::Index size() const { return input_size() + static_cast<Eigen::Index>(free_state_.size()); }

  void bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
    lo.resize(size());
    hi.resize(size());
    lo.head(input_size()).setConstant(p_.u_min);
    hi.head(input_size()).setConstant(p_.u_max);
    for (std::size_t k = 0; k < free_state_.size(); ++k) {
      lo[input_size() + static_cast<Eigen::Index>(k)] = p_.x0_lower[free_state_[k]];
      hi[input_size() + static_cast<Eigen::Index>(k)] = p_.x0_upper[free_state_[k]];
    }
  }

  Eigen::VectorXd pack(const Eigen::VectorXd& inputs) const {
    Eigen::VectorXd v(size());
    v.head(input_size()) = inputs;
    for (std::size_t k = 0; k < free_state_.size(); ++k)
      v[input_size() + static_cast<Eigen::Index>(k)] = x0_[free_state_[k]];
    return v;
  }

  Eigen::VectorXd initial_state(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x = x0_;
    for (std::size_t k = 0; k < free_state_.size(); ++k) x[free_state_[k]] = v[input_size() + static_cast<Eigen::Index>(k)];
    return x;
  }

  /// Minimized quantity: -J(x(t_f)) + penalty.
  double operator()(const Eigen::VectorXd& v) {
    run(v, 0, cache_);
    cache_v_ = v;
    cache_valid_ = true;
    return cache_.value;
  }

  void gradient(const Eigen::VectorXd& v, double fv, Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi, double rel_step) {
    if (!cache_valid_ || cache_v_ != v) (*this)(v);
    g.resize(v.size());
    Eigen::VectorXd vp = v;
    Pass scratch;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double h = rel_step * std::max(1.0, std::abs(v[i]));
      if (v[i] + h > hi[i]) h = -h;
      if (v[i] + h < lo[i]) {
        g[i] = 0.0;
        continue;
      }
      vp[i] = v[i] + h;
      const Eigen::Index from = i < input_size() ? i / channels_ : 0;
      run(vp, from, scratch);
      g[i] = (scratch.value - fv) / h;
      vp[i] = v[i];
    }
  }

  struct Pass {
    std::vector<Eigen::VectorXd> states;  // at local edges 0..remaining
    std::vector<double> penalties;        // cumulative penalty at each edge
    double value = 0.0;
    double objective = 0.0;
  };

  /// Simulates from local edge `from`, reusing the cached prefix.
  void run(const Eigen::VectorXd& v, Eigen::Index from, Pass& out) {
    const auto n = static_cast<std::size_t>(remaining_);
    out.states.resize(n + 1);
    out.penalties.resize(n + 1);
    if (from == 0) {
      out.states[0] = initial_state(v);
      out.penalties[0] = penalty_at(edges_[first_], out.states[0]);
    } else {
      for (Eigen::Index k = 0; k <= from; ++k) {
        out.states[static_cast<std::size_t>(k)] = cache_.states[static_cast<std::size_t>(k)];
        out.penalties[static_cast<std::size_t>(k)] = cache_.penalties[static_cast<std::size_t>(k)];
      }
    }
    x_ = out.states[static_cast<std::size_t>(from)];
    for (std::size_t k = static_cast<std::size_t>(from); k < n; ++k) {
      const std::span<const double> u(v.data() + static_cast<Eigen::Index>(k) * channels_,
                                      static_cast<std::size_t>(channels_));
      const double a = edges_[first_ + k], b = edges_[first_ + k + 1];
      stepper_.advance(m_.system(u), a, b, x_, p_.integrator);
      out.states[k + 1] = x_;
      out.penalties[k + 1] = out.penalties[k] + penalty_at(b, x_);
    }
    out.objective = p_.evaluate_objective(x_);
    out.value = -out.objective + out.penalties[n];
  }

  const Pass& last() const { return cache_; }

 private:
  double penalty_at(double t, const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const auto& c : p_.path_constraints) {
      const double g = c.g(t, x);
      if (g > 0.0) s += g * g;
    }
    return p_.penalty_weight * s;
  }

  const ControlProblem& p_;
  const HybridModel& m_;
  Eigen::VectorXd x0_;
  std::size_t first_;
  std::vector<double> edges_;
  Eigen::Index channels_;
  Eigen::Index remaining_;
  std::vector<Eigen::Index> free_state_;
  model::Rk4Stepper stepper_;
  Eigen::VectorXd x_;
  Pass cache_;
  Eigen::VectorXd cache_v_;
  bool cache_valid_ = false;
};

void check_request(const ControlProblem& problem, const HybridModel& m, const Eigen::VectorXd& x0,
                   std::size_t first_interval) {
  problem.validate();
  if (first_interval >= problem.n_intervals) throw std::invalid_argument("no control intervals left");
  if (x0.size() != m.state_size()) throw std::invalid_argument("initial state has the wrong size");
  if (!x0.allFinite() || x0.minCoeff() < 0.0) throw std::invalid_argument("initial state must be finite and >= 0");
  if (problem.optimize_initial_state && problem.x0_lower.size() != m.state_size())
    throw std::invalid_argument("initial-state bounds have the wrong size");
}

OcpSolution finish(const ControlProblem& problem, const HybridModel& m, const Eigen::VectorXd& x0,
                   std::size_t first, const Eigen::VectorXd& v) {
  Shooter shooter(problem, m, x0, first);
  shooter(v);
  const auto& pass = shooter.last();
  OcpSolution s;
  const auto edges = problem.edges();
  s.profile.edges.assign(edges.begin() + static_cast<std::ptrdiff_t>(first), edges.end());
  const Eigen::Index n = static_cast<Eigen::Index>(problem.n_intervals - first);
  const Eigen::Index ch = m.enzymes();
  s.profile.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      v.data(), n, ch);
  s.objective = pass.objective;
  s.penalty = pass.penalties.back();
  s.x0 = pass.states.front();
  s.final_state = pass.states.back();
  return s;
}

}  // namespace

double simulate_objective(const ControlProblem& problem, const Eigen::VectorXd& x0, std::size_t first_interval,
                          const Eigen::VectorXd& inputs, Eigen::VectorXd* final_state, double* penalty) {
  const HybridModel m(problem.model);
  check_request(problem, m, x0, first_interval);
  Shooter shooter(problem, m, x0, first_interval);
  if (inputs.size() != shooter.input_size()) throw std::invalid_argument("input vector has the wrong size");
  shooter(shooter.pack(inputs));
  const auto& pass = shooter.last();
  if (final_state) *final_state = pass.states.back();
  if (penalty) *penalty = pass.penalties.back();
  return pass.objective;
}

std::size_t switch_interval(const Eigen::VectorXd& inputs, double u_min, double u_max) {
  const double mid = 0.5 * (u_min + u_max);
  for (Eigen::Index i = 0; i < inputs.size(); ++i)
    if (inputs[i] >= mid && u_max > u_min) return static_cast<std::size_t>(i);
  return static_cast<std::size_t>(inputs.size());
}

OcpSolution switch_time_oracle(const ControlProblem& problem, const Eigen::VectorXd& x0, std::size_t first_interval) {
  const HybridModel m(problem.model);
  check_request(problem, m, x0, first_interval);
  if (m.enzymes() != 1) throw std::invalid_argument("switch-time oracle needs a single input channel");
  const auto n = static_cast<Eigen::Index>(problem.n_intervals - first_interval);
  std::vector<double> values(static_cast<std::size_t>(n) + 1);
  std::vector<Eigen::VectorXd> candidates(values.size());
  for (Eigen::Index k = 0; k <= n; ++k) {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, problem.u_max);
    u.head(k).setConstant(problem.u_min);
    candidates[static_cast<std::size_t>(k)] = u;
  }
  parallel_for(
      candidates.size(),
      [&](std::size_t k) {
        Shooter shooter(problem, m, x0, first_interval);
        values[k] = shooter(shooter.pack(candidates[k]));
      },
      problem.threads);
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  Shooter shooter(problem, m, x0, first_interval);
  OcpSolution s = finish(problem, m, x0, first_interval, shooter.pack(candidates[best]));
  s.best_start = "switch@" + std::to_string(first_interval + best);
  return s;
}

OcpSolution solve_ocp(const ControlProblem& problem, const Eigen::VectorXd& x0, std::size_t first_interval,
                      const std::vector<Eigen::VectorXd>& guesses) {
  const HybridModel m(problem.model);
  check_request(problem, m, x0, first_interval);
  const Shooter layout(problem, m, x0, first_interval);
  const Eigen::Index n_in = layout.input_size();

  std::vector<std::pair<std::string, Eigen::VectorXd>> starts;
  auto add = [&](std::string name, const Eigen::VectorXd& u) {
    for (const auto& s : starts)
      if (s.second == u) return;
    starts.emplace_back(std::move(name), u);
  };
  for (std::size_t i = 0; i < guesses.size(); ++i) {
    if (guesses[i].size() != n_in) throw std::invalid_argument("initial guess has the wrong size");
    add("guess" + std::to_string(i), guesses[i].cwiseMax(problem.u_min).cwiseMin(problem.u_max));
  }
  std::vector<StartReport> failed;
  if (m.enzymes() == 1) {
    try {
      const OcpSolution oracle = switch_time_oracle(problem, x0, first_interval);
      add(oracle.best_start, oracle.profile.values.col(0));
    } catch (const std::exception& e) {
      failed.push_back({"switch_oracle", false, 0.0, 0, e.what()});
    }
  }
  add("all_min", Eigen::VectorXd::Constant(n_in, problem.u_min));
  add("all_max", Eigen::VectorXd::Constant(n_in, problem.u_max));

  std::vector<StartReport> reports(starts.size());
  std::vector<BoxBfgsResult> results(starts.size());
  parallel_for(
      starts.size(),
      [&](std::size_t i) {
        StartReport& rep = reports[i];
        rep.name = starts[i].first;
        try {
          Shooter shooter(problem, m, x0, first_interval);
          Eigen::VectorXd lo, hi;
          shooter.bounds(lo, hi);
          const Objective f = [&](const Eigen::VectorXd& v) { return shooter(v); };
          const Gradient g = [&](const Eigen::VectorXd& v, double fv, Eigen::VectorXd& out) {
            shooter.gradient(v, fv, out, lo, hi, problem.solver.fd_step);
          };
          results[i] = minimize_box(f, shooter.pack(starts[i].second), lo, hi, problem.solver, g);
          rep.ok = true;
          rep.objective = -results[i].f;
          rep.iterations = results[i].iterations;
          rep.status = results[i].status;
        } catch (const std::exception& e) {
          rep.ok = false;
          rep.status = e.what();
        }
      },
      problem.threads);

  std::size_t best = starts.size();
  for (std::size_t i = 0; i < starts.size(); ++i)
    if (reports[i].ok && (best == starts.size() || results[i].f < results[best].f)) best = i;
  reports.insert(reports.end(), failed.begin(), failed.end());
  if (best == starts.size()) {
    std::string msg = "all optimizer starts failed:";
    for (const auto& r : reports) msg += " [" + r.name + ": " + r.status + "]";
    throw OcpError(msg, reports);
  }
  OcpSolution s = finish(problem, m, x0, first_interval, results[best].x);
  s.iterations = results[best].iterations;
  s.best_start = reports[best].name;
  s.starts = std::move(reports);
  return s;
}

}  // namespace cybergen::control
