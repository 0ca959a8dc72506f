#include "cybergen/fba/itanet_mini.hpp"

#include <filesystem>
#include <limits>

namespace cybergen::fba {

MetabolicNetwork itanet_mini(const ItanetMiniRecipe& recipe) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double carbon_per_growth = (recipe.glucose_uptake - recipe.maintenance) / recipe.max_growth;

  MetabolicNetwork net;
  net.metabolites = {"A", "ITA", "ACE"};
  net.reactions = {
      {"GLC_upt", {{"A", 1.0}}, 0.0, recipe.glucose_uptake},
      {"MAINT", {{"A", -1.0}}, recipe.maintenance, recipe.maintenance},
      {"BIO", {{"A", -carbon_per_growth}, {"ACE", recipe.acetate_per_growth}}, 0.0, inf},
      {"CADA", {{"A", -1.0}, {"ITA", 1.0}}, 0.0, inf},
      {"ITA_ex", {{"ITA", -1.0}}, 0.0, inf},
      {"ACE_ex", {{"ACE", -1.0}}, 0.0, inf},
  };
  net.objective = {{"BIO", 1.0}};
  net.exchange_ids = {"GLC_upt", "BIO", "ACE_ex", "ITA_ex"};
  net.manipulatable_ids = {"CADA"};
  net.validate();
  return net;
}

MetabolicNetwork resolve_network(const std::string& ref, const ItanetMiniRecipe& recipe) {
  if (ref == kBundledItanetMini) return itanet_mini(recipe);
  if (!std::filesystem::exists(ref)) throw std::runtime_error("network file not found: " + ref);
  return load_network(ref);
}

}  // namespace cybergen::fba
