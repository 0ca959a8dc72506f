#include "cybergen/fba/fba.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cybergen::fba {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

FluxSolution solve_fba(const MetabolicNetwork& net, const FluxAssignment& fixed_fluxes,
                       const FluxAssignment& k_cat, const SimplexOptions& opts) {
  LinearProgram lp;
  lp.A = net.stoichiometric_matrix();
  lp.b = VectorXd::Zero(lp.A.rows());
  lp.c = -net.objective_vector();
  lp.lower = net.lower_bounds();
  lp.upper = net.upper_bounds();
  for (const auto& [id, value] : fixed_fluxes) {
    const auto j = static_cast<Index>(net.require_reaction(id));
    if (!(value >= lp.lower(j) && value <= lp.upper(j)))
      throw ValidationError("pinned flux for '" + id + "' lies outside its bounds");
    lp.lower(j) = value;
    lp.upper(j) = value;
  }
  for (const auto& [id, k] : k_cat) {
    if (!(k > 0.0)) throw ValidationError("k_cat for '" + id + "' must be positive");
    if (std::find(net.manipulatable_ids.begin(), net.manipulatable_ids.end(), id) == net.manipulatable_ids.end())
      throw ValidationError("k_cat given for non-manipulatable reaction '" + id + "'");
  }

  const LpResult res = solve_lp(lp, opts);
  FluxSolution sol;
  sol.status = res.status;
  sol.iterations = res.iterations;
  if (res.status != LpStatus::optimal) return sol;

  for (std::size_t j = 0; j < net.reactions.size(); ++j)
    sol.fluxes[net.reactions[j].id] = res.x(static_cast<Index>(j));
  sol.objective_value = -res.objective;
  for (const auto& [id, k] : k_cat) sol.enzyme_levels[id] = std::abs(sol.fluxes.at(id)) / k;
  return sol;
}

double steady_state_residual(const MetabolicNetwork& net, const FluxSolution& sol) {
  VectorXd v(static_cast<Index>(net.num_reactions()));
  for (std::size_t j = 0; j < net.reactions.size(); ++j) v(static_cast<Index>(j)) = sol.fluxes.at(net.reactions[j].id);
  if (net.num_metabolites() == 0) return 0.0;
  return (net.stoichiometric_matrix() * v).lpNorm<Eigen::Infinity>();
}

std::vector<FluxSolution> enumerate_vertices(const MetabolicNetwork& net, std::size_t max_reactions) {
  const std::size_t n = net.num_reactions();
  if (n > max_reactions)
    throw std::invalid_argument("enumerate_vertices: " + std::to_string(n) + " reactions exceeds the limit of " +
                                std::to_string(max_reactions));
  const MatrixXd S = net.stoichiometric_matrix();
  const VectorXd lo = net.lower_bounds();
  const VectorXd hi = net.upper_bounds();
  const VectorXd c = net.objective_vector();
  const Index m = S.rows();
  constexpr double kTol = 1e-9;

  std::vector<VectorXd> vertices;
  auto remember = [&](const VectorXd& v) {
    for (const auto& w : vertices)
      if ((w - v).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, v.lpNorm<Eigen::Infinity>())) return;
    vertices.push_back(v);
  };

  // Every subset of reactions is tried as the basic set; it must have
  // independent columns so the remaining bound choices pin a unique point.
  const std::size_t subsets = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<Index> basic, nonbasic;
    for (std::size_t j = 0; j < n; ++j) (mask >> j & 1U ? basic : nonbasic).push_back(static_cast<Index>(j));
    if (static_cast<Index>(basic.size()) > m) continue;

    MatrixXd SB(m, static_cast<Index>(basic.size()));
    for (std::size_t k = 0; k < basic.size(); ++k) SB.col(static_cast<Index>(k)) = S.col(basic[k]);
    Eigen::ColPivHouseholderQR<MatrixXd> qr;
    if (!basic.empty()) {
      qr.setThreshold(1e-10);
      qr.compute(SB);
      if (qr.rank() != static_cast<Index>(basic.size())) continue;
    }

    // Each nonbasic reaction sits at a finite bound; a fixed reaction has one choice.
    std::vector<std::vector<double>> choices;
    bool usable = true;
    for (Index j : nonbasic) {
      std::vector<double> opts;
      if (std::isfinite(lo(j))) opts.push_back(lo(j));
      if (std::isfinite(hi(j)) && hi(j) != lo(j)) opts.push_back(hi(j));
      if (opts.empty()) usable = false;
      choices.push_back(std::move(opts));
    }
    if (!usable) continue;

    std::vector<std::size_t> pick(nonbasic.size(), 0);
    for (;;) {
      VectorXd v = VectorXd::Zero(static_cast<Index>(n));
      for (std::size_t k = 0; k < nonbasic.size(); ++k) v(nonbasic[k]) = choices[k][pick[k]];
      const VectorXd rhs = m > 0 ? VectorXd(-(S * v)) : VectorXd(0);
      bool ok = true;
      if (!basic.empty()) {
        const VectorXd xb = qr.solve(rhs);
        if ((SB * xb - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
          ok = false;
        for (std::size_t k = 0; ok && k < basic.size(); ++k) v(basic[k]) = xb(static_cast<Index>(k));
      } else if (m > 0 && rhs.lpNorm<Eigen::Infinity>() > kTol) {
        ok = false;
      }
      for (Index j = 0; ok && j < static_cast<Index>(n); ++j)
        if (v(j) < lo(j) - kTol || v(j) > hi(j) + kTol) ok = false;
      if (ok) remember(v);

      std::size_t k = 0;
      while (k < pick.size() && ++pick[k] == choices[k].size()) pick[k++] = 0;
      if (k == pick.size()) break;
    }
  }

  std::vector<FluxSolution> out;
  out.reserve(vertices.size());
  for (const auto& v : vertices) {
    FluxSolution s;
    s.status = LpStatus::optimal;
    for (std::size_t j = 0; j < n; ++j) s.fluxes[net.reactions[j].id] = v(static_cast<Index>(j));
    s.objective_value = c.dot(v);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cybergen::fba
