#pragma once

#include <cstddef>

#include "cybergen/surrogate/dataset.hpp"

namespace cybergen::surrogate {

inline constexpr double kCadaKcat = 66240.0;  // 1/h
inline constexpr double kCadaMaxFlux = 3.476;  // mmol/g_b/h

/// CADA grid: `points` evenly spaced fluxes on [0, max_flux].
GridSpec itanet_grid(std::size_t points = 498, double max_flux = kCadaMaxFlux);

/// Feature e_cadA and labels v_bio, v_ace, v_ita for the bundled network.
/// Glucose uptake is constant over the sweep and is not a label.
SweepOptions itanet_sweep_options(double k_cada = kCadaKcat);

}  // namespace cybergen::surrogate
