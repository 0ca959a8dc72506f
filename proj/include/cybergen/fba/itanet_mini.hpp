#pragma once

#include "cybergen/fba/network.hpp"

namespace cybergen::fba {

/// Reduced growth/itaconate network shipped with the toolkit.
///
/// One carbon pool A is fed by glucose uptake and drained by a fixed
/// maintenance demand, biomass synthesis and the cadA reaction:
///
///   GLC_upt : -> A                        [0, 3.48]
///   MAINT   : A ->                        [0.004, 0.004]
///   BIO     : c_bio A -> alpha ACE        [0, inf)   objective 1
///   CADA    : A -> ITA                    [0, inf)   manipulatable
///   ITA_ex  : ITA ->                      [0, inf)
///   ACE_ex  : ACE ->                      [0, inf)
///
/// c_bio = (3.48 - 0.004) / 0.277, so the unconstrained optimum grows at
/// 0.277 1/h and pinning CADA at 3.476 leaves no carbon for growth.
/// alpha is the acetate released per unit biomass flux.
struct ItanetMiniRecipe {
  double glucose_uptake = 3.48;
  double maintenance = 0.004;
  double max_growth = 0.277;
  double acetate_per_growth = 0.5;
};

MetabolicNetwork itanet_mini(const ItanetMiniRecipe& recipe = {});

inline constexpr const char* kBundledItanetMini = "bundled:itanet-mini";

/// Resolves `bundled:itanet-mini` to the built-in network and anything else
/// to a file path.
MetabolicNetwork resolve_network(const std::string& ref, const ItanetMiniRecipe& recipe = {});

}  // namespace cybergen::fba
