#pragma once

#include <map>
#include <string>
#include <vector>

#include "cybergen/fba/network.hpp"
#include "cybergen/fba/simplex.hpp"

namespace cybergen::fba {

struct FluxSolution {
  LpStatus status = LpStatus::infeasible;
  std::map<std::string, double> fluxes;          // mmol/g_b/h, biomass in 1/h
  double objective_value = 0.0;
  std::map<std::string, double> enzyme_levels;   // mmol/g_b, manipulatable reactions only
  int iterations = 0;
};

using FluxAssignment = std::map<std::string, double>;

/// Maximizes the network objective subject to S v = 0, the flux bounds and
/// the pinned fluxes in `fixed_fluxes`. Enzyme levels follow the
/// enzyme-capacity relation e_i = |v_i| / kcat_i for every manipulatable
/// reaction that has a catalytic constant in `k_cat`.
///
/// Infeasible and unbounded programs are reported through `status`; only a
/// solver breakdown throws (NumericalFailure). A pinned value outside the
/// reaction's own bounds, or an unknown id, throws ValidationError.
FluxSolution solve_fba(const MetabolicNetwork& net, const FluxAssignment& fixed_fluxes = {},
                       const FluxAssignment& k_cat = {}, const SimplexOptions& opts = {});

/// Largest entry of |S v| for a flux vector ordered like `net.reactions`.
double steady_state_residual(const MetabolicNetwork& net, const FluxSolution& sol);

/// Brute-force enumeration of the basic feasible solutions of
/// {S v = 0, lower <= v <= upper}: every split of the reactions into
/// "at lower", "at upper" and a linearly independent "basic" set is tried.
/// Vertices are returned deduplicated, each with its objective value.
/// Intended as a test oracle; throws std::invalid_argument for more than
/// `max_reactions` reactions.
std::vector<FluxSolution> enumerate_vertices(const MetabolicNetwork& net, std::size_t max_reactions = 10);

}  // namespace cybergen::fba
