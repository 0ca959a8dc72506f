#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cybergen::fba {

/// Malformed network document (bad JSON, wrong types, missing keys).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed document whose content breaks a network invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Reaction {
  std::string id;
  /// metabolite id -> stoichiometric coefficient, kept in document order
  std::vector<std::pair<std::string, double>> stoich;
  double lower = 0.0;  // mmol/g_b/h, may be -inf
  double upper = 0.0;  // mmol/g_b/h, may be +inf
};

/// Stoichiometric model of the intracellular metabolism.
///
/// Rows of the stoichiometric matrix follow `metabolites`, columns follow
/// `reactions`. Exchange reactions are the ones whose optimal fluxes become
/// surrogate labels; manipulatable reactions are the ones whose flux is pinned
/// by the enzyme level.
struct MetabolicNetwork {
  std::vector<std::string> metabolites;
  std::vector<Reaction> reactions;
  std::vector<std::pair<std::string, double>> objective;  // reaction id -> weight
  std::vector<std::string> exchange_ids;
  std::vector<std::string> manipulatable_ids;

  std::size_t num_metabolites() const { return metabolites.size(); }
  std::size_t num_reactions() const { return reactions.size(); }

  std::optional<std::size_t> reaction_index(std::string_view id) const;
  std::optional<std::size_t> metabolite_index(std::string_view id) const;
  /// Throws ValidationError for an undeclared id.
  std::size_t require_reaction(std::string_view id) const;

  Eigen::MatrixXd stoichiometric_matrix() const;
  Eigen::VectorXd objective_vector() const;
  Eigen::VectorXd lower_bounds() const;
  Eigen::VectorXd upper_bounds() const;

  /// Checks every invariant; throws ValidationError on the first violation.
  void validate() const;
};

MetabolicNetwork parse_network(std::string_view json_text);
MetabolicNetwork load_network(const std::filesystem::path& path);

/// Serializes with shortest round-trip float formatting, so
/// parse_network(to_json(n)) reproduces every coefficient bit for bit.
/// Infinite bounds are written as the strings "inf" / "-inf".
std::string to_json(const MetabolicNetwork& net);
void save_network(const MetabolicNetwork& net, const std::filesystem::path& path);

/// Copy of `net` with the given reactions pinned to a single value (lower = upper).
MetabolicNetwork with_fixed_fluxes(const MetabolicNetwork& net,
                                   const std::vector<std::pair<std::string, double>>& fixed);

}  // namespace cybergen::fba
