#include "cybergen/fba/network.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cybergen::fba {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double bound_from_json(const ordered_json& node, const std::string& where) {
  if (node.is_number()) return node.get<double>();
  if (node.is_string()) {
    const auto s = node.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ParseError(where + ": bound must be a number, \"inf\" or \"-inf\"");
}

ordered_json bound_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? ordered_json("inf") : ordered_json("-inf");
  return ordered_json(v);
}

std::vector<std::string> string_array(const ordered_json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  const auto& node = doc.at(key);
  if (!node.is_array()) throw ParseError(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  out.reserve(node.size());
  for (const auto& item : node) {
    if (!item.is_string()) throw ParseError(std::string("'") + key + "' entries must be strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

std::optional<std::size_t> MetabolicNetwork::reaction_index(std::string_view id) const {
  for (std::size_t j = 0; j < reactions.size(); ++j)
    if (reactions[j].id == id) return j;
  return std::nullopt;
}

std::optional<std::size_t> MetabolicNetwork::metabolite_index(std::string_view id) const {
  for (std::size_t i = 0; i < metabolites.size(); ++i)
    if (metabolites[i] == id) return i;
  return std::nullopt;
}

std::size_t MetabolicNetwork::require_reaction(std::string_view id) const {
  if (auto j = reaction_index(id)) return *j;
  throw ValidationError("unknown reaction '" + std::string(id) + "'");
}

Eigen::MatrixXd MetabolicNetwork::stoichiometric_matrix() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(metabolites.size()),
                                            static_cast<Eigen::Index>(reactions.size()));
  for (std::size_t j = 0; j < reactions.size(); ++j) {
    for (const auto& [met, coeff] : reactions[j].stoich) {
      const auto i = metabolite_index(met);
      if (!i) throw ValidationError("reaction '" + reactions[j].id + "' references undeclared metabolite '" + met + "'");
      s(static_cast<Eigen::Index>(*i), static_cast<Eigen::Index>(j)) += coeff;
    }
  }
  return s;
}

Eigen::VectorXd MetabolicNetwork::objective_vector() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(reactions.size()));
  for (const auto& [id, w] : objective) c(static_cast<Eigen::Index>(require_reaction(id))) += w;
  return c;
}

Eigen::VectorXd MetabolicNetwork::lower_bounds() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(reactions.size()));
  for (std::size_t j = 0; j < reactions.size(); ++j) v(static_cast<Eigen::Index>(j)) = reactions[j].lower;
  return v;
}

Eigen::VectorXd MetabolicNetwork::upper_bounds() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(reactions.size()));
  for (std::size_t j = 0; j < reactions.size(); ++j) v(static_cast<Eigen::Index>(j)) = reactions[j].upper;
  return v;
}

void MetabolicNetwork::validate() const {
  std::set<std::string_view> mets;
  for (const auto& m : metabolites) {
    if (m.empty()) throw ValidationError("empty metabolite id");
    if (!mets.insert(m).second) throw ValidationError("duplicate metabolite id '" + m + "'");
  }
  std::set<std::string_view> rxns;
  for (const auto& r : reactions) {
    if (r.id.empty()) throw ValidationError("empty reaction id");
    if (!rxns.insert(r.id).second) throw ValidationError("duplicate reaction id '" + r.id + "'");
    if (std::isnan(r.lower) || std::isnan(r.upper))
      throw ValidationError("reaction '" + r.id + "' has a NaN bound");
    if (r.lower > r.upper)
      throw ValidationError("reaction '" + r.id + "' has lower bound above upper bound");
    std::set<std::string_view> seen;
    for (const auto& [met, coeff] : r.stoich) {
      if (!mets.count(met))
        throw ValidationError("reaction '" + r.id + "' references undeclared metabolite '" + met + "'");
      if (!seen.insert(met).second)
        throw ValidationError("reaction '" + r.id + "' lists metabolite '" + met + "' twice");
      if (!std::isfinite(coeff))
        throw ValidationError("reaction '" + r.id + "' has a non-finite coefficient");
    }
  }
  auto check_ids = [&](const auto& ids, const char* what) {
    for (const auto& id : ids)
      if (!rxns.count(id)) throw ValidationError(std::string(what) + " references undeclared reaction '" + std::string(id) + "'");
  };
  std::vector<std::string> objective_ids;
  for (const auto& [id, w] : objective) objective_ids.push_back(id);
  check_ids(objective_ids, "objective");
  check_ids(exchange_ids, "exchange");
  check_ids(manipulatable_ids, "manipulatable");
}

MetabolicNetwork parse_network(std::string_view json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("network document must be a JSON object");

  MetabolicNetwork net;
  net.metabolites = string_array(doc, "metabolites");
  net.exchange_ids = string_array(doc, "exchange");
  net.manipulatable_ids = string_array(doc, "manipulatable");

  if (!doc.contains("reactions") || !doc["reactions"].is_array())
    throw ParseError("'reactions' must be an array");
  for (const auto& node : doc["reactions"]) {
    if (!node.is_object() || !node.contains("id") || !node["id"].is_string())
      throw ParseError("each reaction needs a string 'id'");
    Reaction r;
    r.id = node["id"].get<std::string>();
    const std::string where = "reaction '" + r.id + "'";
    if (!node.contains("lower") || !node.contains("upper")) throw ParseError(where + ": missing bounds");
    r.lower = bound_from_json(node["lower"], where);
    r.upper = bound_from_json(node["upper"], where);
    if (node.contains("stoich")) {
      if (!node["stoich"].is_object()) throw ParseError(where + ": 'stoich' must be an object");
      for (const auto& [met, coeff] : node["stoich"].items()) {
        if (!coeff.is_number()) throw ParseError(where + ": coefficient of '" + met + "' is not a number");
        r.stoich.emplace_back(met, coeff.get<double>());
      }
    }
    net.reactions.push_back(std::move(r));
  }

  if (!doc.contains("objective") || !doc["objective"].is_object())
    throw ParseError("'objective' must be an object");
  for (const auto& [id, w] : doc["objective"].items()) {
    if (!w.is_number()) throw ParseError("objective weight of '" + id + "' is not a number");
    net.objective.emplace_back(id, w.get<double>());
  }

  net.validate();
  return net;
}

MetabolicNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

std::string to_json(const MetabolicNetwork& net) {
  ordered_json doc;
  doc["metabolites"] = net.metabolites;
  ordered_json rxns = ordered_json::array();
  for (const auto& r : net.reactions) {
    ordered_json node;
    node["id"] = r.id;
    ordered_json st = ordered_json::object();
    for (const auto& [met, coeff] : r.stoich) st[met] = coeff;
    node["stoich"] = st;
    node["lower"] = bound_to_json(r.lower);
    node["upper"] = bound_to_json(r.upper);
    rxns.push_back(std::move(node));
  }
  doc["reactions"] = rxns;
  ordered_json obj = ordered_json::object();
  for (const auto& [id, w] : net.objective) obj[id] = w;
  doc["objective"] = obj;
  doc["exchange"] = net.exchange_ids;
  doc["manipulatable"] = net.manipulatable_ids;
  return doc.dump(2) + "\n";
}

void save_network(const MetabolicNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network file: " + path.string());
  out << to_json(net);
}

MetabolicNetwork with_fixed_fluxes(const MetabolicNetwork& net,
                                   const std::vector<std::pair<std::string, double>>& fixed) {
  MetabolicNetwork out = net;
  for (const auto& [id, value] : fixed) {
    auto& r = out.reactions[out.require_reaction(id)];
    r.lower = value;
    r.upper = value;
  }
  return out;
}

}  // namespace cybergen::fba
