#include "cybergen/fba/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cybergen::fba {

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState { basic, at_lower, at_upper, free_zero };

/// Working state shared by both phases. Columns [0, n) are structural,
/// [n, n + m) are the phase-1 artificials.
class BoundedSimplex {
 public:
  BoundedSimplex(const LinearProgram& lp, const SimplexOptions& opts) : opts_(opts) {
    m_ = lp.A.rows();
    n_ = lp.A.cols();
    const Index total = n_ + m_;
    A_ = MatrixXd::Zero(m_, total);
    A_.leftCols(n_) = lp.A;
    b_ = lp.b;
    lower_ = VectorXd::Zero(total);
    upper_ = VectorXd::Constant(total, kInf);
    lower_.head(n_) = lp.lower;
    upper_.head(n_) = lp.upper;
    x_ = VectorXd::Zero(total);
    state_.assign(static_cast<std::size_t>(total), VarState::at_lower);

    for (Index j = 0; j < n_; ++j) {
      if (std::isfinite(lower_(j))) {
        x_(j) = lower_(j);
        state_[static_cast<std::size_t>(j)] = VarState::at_lower;
      } else if (std::isfinite(upper_(j))) {
        x_(j) = upper_(j);
        state_[static_cast<std::size_t>(j)] = VarState::at_upper;
      } else {
        x_(j) = 0.0;
        state_[static_cast<std::size_t>(j)] = VarState::free_zero;
      }
    }
    const VectorXd r = b_ - lp.A * x_.head(n_);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Index i = 0; i < m_; ++i) {
      const double sign = r(i) >= 0.0 ? 1.0 : -1.0;
      A_(i, n_ + i) = sign;
      x_(n_ + i) = std::abs(r(i));
      state_[static_cast<std::size_t>(n_ + i)] = VarState::basic;
      basis_[static_cast<std::size_t>(i)] = n_ + i;
    }
    refactor();

    budget_ = opts_.max_iterations > 0 ? opts_.max_iterations
                                       : static_cast<int>(50 * (m_ + n_) + 1000);
  }

  LpResult run(const LinearProgram& lp) {
    LpResult res;
    // Phase 1: drive the artificials to zero.
    VectorXd phase1 = VectorXd::Zero(n_ + m_);
    phase1.tail(m_).setOnes();
    const auto p1 = iterate(phase1);
    if (p1 != LpStatus::optimal) throw NumericalFailure("phase 1 reported an unbounded ray");
    const double infeas = x_.tail(m_).sum();
    const double scale = std::max(1.0, b_.lpNorm<Eigen::Infinity>());
    if (infeas > 1e3 * opts_.feasibility_tol * scale) {
      res.status = LpStatus::infeasible;
      res.iterations = iterations_;
      return res;
    }
    // Artificials are pinned to zero for phase 2; basic ones may linger at zero.
    for (Index i = 0; i < m_; ++i) {
      upper_(n_ + i) = 0.0;
      if (state_[static_cast<std::size_t>(n_ + i)] != VarState::basic) x_(n_ + i) = 0.0;
    }

    VectorXd phase2 = VectorXd::Zero(n_ + m_);
    phase2.head(n_) = lp.c;
    const auto p2 = iterate(phase2);
    res.iterations = iterations_;
    if (p2 == LpStatus::unbounded) {
      res.status = LpStatus::unbounded;
      return res;
    }
    refactor();
    compute_basic_values();
    res.status = LpStatus::optimal;
    res.x = x_.head(n_);
    // Snap round-off outside the box back onto it.
    for (Index j = 0; j < n_; ++j) {
      if (res.x(j) < lower_(j) && res.x(j) > lower_(j) - 1e-9) res.x(j) = lower_(j);
      if (res.x(j) > upper_(j) && res.x(j) < upper_(j) + 1e-9) res.x(j) = upper_(j);
    }
    res.objective = lp.c.dot(res.x);
    return res;
  }

 private:
  void refactor() {
    MatrixXd B(m_, m_);
    for (Index i = 0; i < m_; ++i) B.col(i) = A_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::FullPivLU<MatrixXd> lu(B);
    if (m_ > 0 && !lu.isInvertible()) throw NumericalFailure("simplex basis became singular");
    Binv_ = m_ > 0 ? MatrixXd(lu.inverse()) : MatrixXd(0, 0);
    since_refactor_ = 0;
  }

  void compute_basic_values() {
    VectorXd rhs = b_;
    for (Index j = 0; j < n_ + m_; ++j)
      if (state_[static_cast<std::size_t>(j)] != VarState::basic && x_(j) != 0.0) rhs -= A_.col(j) * x_(j);
    const VectorXd xb = Binv_ * rhs;
    for (Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
  }

  bool is_fixed(Index j) const { return lower_(j) == upper_(j); }

  LpStatus iterate(const VectorXd& cost) {
    int degenerate_run = 0;
    bool bland = false;
    for (;;) {
      if (iterations_ >= budget_) throw NumericalFailure("simplex iteration budget exhausted");
      if (since_refactor_ >= opts_.refactor_every) refactor();
      compute_basic_values();

      VectorXd cb(m_);
      for (Index i = 0; i < m_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
      const Eigen::RowVectorXd y = cb.transpose() * Binv_;

      // Pricing.
      Index entering = -1;
      double best = 0.0;
      double direction = 0.0;
      for (Index j = 0; j < n_ + m_; ++j) {
        const auto st = state_[static_cast<std::size_t>(j)];
        if (st == VarState::basic || is_fixed(j)) continue;
        const double d = cost(j) - y.dot(A_.col(j));
        double dir = 0.0;
        if (st == VarState::at_lower && d < -opts_.optimality_tol) dir = 1.0;
        else if (st == VarState::at_upper && d > opts_.optimality_tol) dir = -1.0;
        else if (st == VarState::free_zero && std::abs(d) > opts_.optimality_tol) dir = d < 0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          direction = dir;
        }
      }
      if (entering < 0) return LpStatus::optimal;

      const VectorXd alpha = Binv_ * A_.col(entering);

      // Ratio test. The entering variable may also just flip to its other bound.
      double step = upper_(entering) - lower_(entering);
      if (!std::isfinite(step)) step = kInf;
      Index leaving = -1;
      bool leaving_to_upper = false;
      double leaving_pivot = 0.0;
      for (Index i = 0; i < m_; ++i) {
        const double delta = direction * alpha(i);
        if (std::abs(delta) <= opts_.pivot_tol) continue;
        const Index bj = basis_[static_cast<std::size_t>(i)];
        double ratio;
        bool to_upper;
        if (delta > 0) {
          if (!std::isfinite(lower_(bj))) continue;
          ratio = (x_(bj) - lower_(bj)) / delta;
          to_upper = false;
        } else {
          if (!std::isfinite(upper_(bj))) continue;
          ratio = (upper_(bj) - x_(bj)) / -delta;
          to_upper = true;
        }
        ratio = std::max(ratio, 0.0);
        bool take = false;
        if (ratio < step - 1e-12) {
          take = true;
        } else if (leaving >= 0 && ratio <= step + 1e-12) {
          // Tie: Bland picks the lowest index, otherwise the larger pivot.
          take = bland ? bj < basis_[static_cast<std::size_t>(leaving)]
                       : std::abs(alpha(i)) > std::abs(leaving_pivot);
        }
        if (take) {
          step = std::min(step, ratio);
          leaving = i;
          leaving_to_upper = to_upper;
          leaving_pivot = alpha(i);
        }
      }
      if (!std::isfinite(step)) return LpStatus::unbounded;

      ++iterations_;
      if (step <= opts_.feasibility_tol) {
        if (++degenerate_run >= opts_.degenerate_limit) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      if (leaving < 0) {
        // Bound flip, basis unchanged.
        auto& st = state_[static_cast<std::size_t>(entering)];
        if (direction > 0) {
          x_(entering) = upper_(entering);
          st = VarState::at_upper;
        } else {
          x_(entering) = lower_(entering);
          st = VarState::at_lower;
        }
        continue;
      }

      const Index out = basis_[static_cast<std::size_t>(leaving)];
      x_(entering) += direction * step;
      x_(out) = leaving_to_upper ? upper_(out) : lower_(out);
      state_[static_cast<std::size_t>(out)] = leaving_to_upper ? VarState::at_upper : VarState::at_lower;
      state_[static_cast<std::size_t>(entering)] = VarState::basic;
      basis_[static_cast<std::size_t>(leaving)] = entering;

      // Product-form update of the explicit inverse.
      const double pivot = alpha(leaving);
      Binv_.row(leaving) /= pivot;
      for (Index i = 0; i < m_; ++i) {
        if (i == leaving || alpha(i) == 0.0) continue;
        Binv_.row(i) -= alpha(i) * Binv_.row(leaving);
      }
      ++since_refactor_;
    }
  }

  SimplexOptions opts_;
  Index m_ = 0;
  Index n_ = 0;
  MatrixXd A_;
  VectorXd b_;
  VectorXd lower_;
  VectorXd upper_;
  VectorXd x_;
  std::vector<VarState> state_;
  std::vector<Index> basis_;
  MatrixXd Binv_;
  int since_refactor_ = 0;
  int iterations_ = 0;
  int budget_ = 0;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const SimplexOptions& opts) {
  const Index n = lp.A.cols();
  if (lp.A.rows() != lp.b.size() || lp.c.size() != n || lp.lower.size() != n || lp.upper.size() != n)
    throw std::invalid_argument("solve_lp: inconsistent dimensions");
  for (Index j = 0; j < n; ++j) {
    if (lp.lower(j) > lp.upper(j)) {
      LpResult r;
      r.status = LpStatus::infeasible;
      return r;
    }
  }
  BoundedSimplex simplex(lp, opts);
  return simplex.run(lp);
}

}  // namespace cybergen::fba
