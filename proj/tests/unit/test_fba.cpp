#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "../support/random_networks.hpp"
#include "cybergen/fba/fba.hpp"
#include "cybergen/fba/itanet_mini.hpp"

using namespace cybergen::fba;

namespace {

double best_vertex_objective(const std::vector<FluxSolution>& vertices) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : vertices) best = std::max(best, v.objective_value);
  return best;
}

constexpr const char* kMini = R"({
  "metabolites": ["A"],
  "reactions": [
    {"id": "in", "stoich": {"A": 1}, "lower": 0, "upper": 2},
    {"id": "out", "stoich": {"A": -1}, "lower": 0, "upper": "inf"}
  ],
  "objective": {"out": 1},
  "exchange": ["out"],
  "manipulatable": []
})";

}  // namespace

TEST_CASE("load_network parses the documented schema") {
  const auto net = parse_network(kMini);
  CHECK(net.num_metabolites() == 1);
  CHECK(net.num_reactions() == 2);
  CHECK(std::isinf(net.reactions[1].upper));
  const auto S = net.stoichiometric_matrix();
  CHECK(S.rows() == 1);
  CHECK(S.cols() == 2);
  CHECK(S(0, 1) == -1.0);
}

TEST_CASE("load_network rejects bad documents") {
  SUBCASE("inverted bounds") {
    CHECK_THROWS_AS(parse_network(R"({"metabolites":["A"],"reactions":[{"id":"r","stoich":{"A":1},"lower":1,"upper":0}],
      "objective":{},"exchange":[],"manipulatable":[]})"),
                    ValidationError);
  }
  SUBCASE("undeclared metabolite") {
    CHECK_THROWS_AS(parse_network(R"({"metabolites":["A"],"reactions":[{"id":"r","stoich":{"X":1},"lower":0,"upper":1}],
      "objective":{},"exchange":[],"manipulatable":[]})"),
                    ValidationError);
  }
  SUBCASE("duplicate reaction id") {
    CHECK_THROWS_AS(parse_network(R"({"metabolites":["A"],"reactions":[{"id":"r","stoich":{"A":1},"lower":0,"upper":1},
      {"id":"r","stoich":{"A":-1},"lower":0,"upper":1}],"objective":{},"exchange":[],"manipulatable":[]})"),
                    ValidationError);
  }
  SUBCASE("undeclared objective reaction") {
    CHECK_THROWS_AS(parse_network(R"({"metabolites":[],"reactions":[],"objective":{"q":1},"exchange":[],"manipulatable":[]})"),
                    ValidationError);
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(parse_network("{\"metabolites\": ["), ParseError); }
  SUBCASE("wrong type") {
    CHECK_THROWS_AS(parse_network(R"({"metabolites":"A","reactions":[],"objective":{},"exchange":[],"manipulatable":[]})"),
                    ParseError);
  }
}

TEST_CASE("network JSON round-trips bit for bit") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = cybergen::testing::random_network(rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& r : net.reactions)
      for (auto& [met, c] : r.stoich) c *= 1.0 + u(rng) / 3.0;  // awkward binary fractions
    const std::string text = to_json(net);
    const auto back = parse_network(text);
    CHECK(to_json(back) == text);
    REQUIRE(back.reactions.size() == net.reactions.size());
    for (std::size_t j = 0; j < net.reactions.size(); ++j) {
      CHECK(back.reactions[j].lower == net.reactions[j].lower);
      for (std::size_t k = 0; k < net.reactions[j].stoich.size(); ++k)
        CHECK(back.reactions[j].stoich[k].second == net.reactions[j].stoich[k].second);
    }
  }
}

TEST_CASE("itanet-mini structure and endpoints") {
  const auto net = itanet_mini();
  CHECK(net.num_reactions() == 6);
  CHECK(net.num_metabolites() == 3);

  const FluxAssignment kcat{{"CADA", 66240.0}};
  SUBCASE("no induction: maximum growth") {
    const auto sol = solve_fba(net, {{"CADA", 0.0}}, kcat);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(sol.fluxes.at("BIO") == doctest::Approx(0.277).epsilon(1e-12));
    CHECK(sol.fluxes.at("ITA_ex") == doctest::Approx(0.0));
    CHECK(sol.fluxes.at("GLC_upt") == doctest::Approx(3.48));
    CHECK(sol.fluxes.at("ACE_ex") == doctest::Approx(0.277 * 0.5));
    CHECK(steady_state_residual(net, sol) <= 1e-8);
    CHECK(sol.enzyme_levels.at("CADA") == 0.0);
  }
  SUBCASE("full induction: no growth") {
    const auto sol = solve_fba(net, {{"CADA", 3.476}}, kcat);
    REQUIRE(sol.status == LpStatus::optimal);
    CHECK(std::abs(sol.fluxes.at("BIO")) <= 1e-9);
    CHECK(sol.fluxes.at("ITA_ex") == doctest::Approx(3.476));
    CHECK(sol.enzyme_levels.at("CADA") == doctest::Approx(3.476 / 66240.0));
  }
  SUBCASE("beyond the carbon balance") {
    CHECK(solve_fba(net, {{"CADA", 10.0}}).status == LpStatus::infeasible);
    CHECK(solve_fba(net, {{"CADA", 3.4761}}).status == LpStatus::infeasible);
  }
  SUBCASE("monotone infeasibility along the cadA axis") {
    bool seen_infeasible = false;
    for (double a = 3.40; a < 3.60; a += 0.005) {
      const bool infeasible = solve_fba(net, {{"CADA", a}}).status == LpStatus::infeasible;
      if (seen_infeasible) CHECK(infeasible);
      seen_infeasible = seen_infeasible || infeasible;
    }
    CHECK(seen_infeasible);
  }
  SUBCASE("unknown or out-of-bounds pins") {
    CHECK_THROWS_AS(solve_fba(net, {{"NOPE", 1.0}}), ValidationError);
    CHECK_THROWS_AS(solve_fba(net, {{"CADA", -1.0}}), ValidationError);
    CHECK_THROWS_AS(solve_fba(net, {}, {{"BIO", 1.0}}), ValidationError);
  }
}

TEST_CASE("all bounds zero forces the zero flux") {
  auto net = itanet_mini();
  for (auto& r : net.reactions) r.lower = r.upper = 0.0;
  const auto sol = solve_fba(net);
  REQUIRE(sol.status == LpStatus::optimal);
  for (const auto& [id, v] : sol.fluxes) CHECK(v == 0.0);
  CHECK(sol.objective_value == 0.0);
}

TEST_CASE("unbounded and infeasible programs are reported, not thrown") {
  auto net = parse_network(kMini);
  net.reactions[0].upper = std::numeric_limits<double>::infinity();
  CHECK(solve_fba(net).status == LpStatus::unbounded);

  auto blocked = parse_network(kMini);
  blocked.reactions[0].lower = blocked.reactions[0].upper = 1.0;  // forced inflow
  blocked.reactions[1].upper = 0.5;                               // capped outflow
  CHECK(solve_fba(blocked).status == LpStatus::infeasible);
}

TEST_CASE("simplex iteration budget") {
  SimplexOptions opts;
  opts.max_iterations = 1;
  CHECK_THROWS_AS(solve_fba(itanet_mini(), {{"CADA", 1.0}}, {}, opts), NumericalFailure);
}

TEST_CASE("vertex enumeration oracle") {
  SUBCASE("itanet-mini with its open reactions capped") {
    auto net = itanet_mini();
    for (auto& r : net.reactions)
      if (std::isinf(r.upper)) r.upper = 100.0;
    const auto vertices = enumerate_vertices(net);
    CHECK(best_vertex_objective(vertices) == doctest::Approx(0.277).epsilon(1e-9));
  }
  SUBCASE("single reaction, bounds [0, 2]") {
    MetabolicNetwork net;
    net.reactions = {{"r", {}, 0.0, 2.0}};
    net.objective = {{"r", 1.0}};
    const auto vertices = enumerate_vertices(net);
    CHECK(vertices.size() == 2);
    CHECK(best_vertex_objective(vertices) == 2.0);
  }
  SUBCASE("empty feasible region") {
    auto net = parse_network(kMini);
    net.reactions[0].lower = net.reactions[0].upper = 1.0;
    net.reactions[1].upper = 0.5;
    CHECK(enumerate_vertices(net).empty());
  }
  SUBCASE("size guard") {
    MetabolicNetwork net;
    for (int j = 0; j < 11; ++j) net.reactions.push_back({"r" + std::to_string(j), {}, 0.0, 1.0});
    CHECK_THROWS_AS(enumerate_vertices(net), std::invalid_argument);
  }
}

TEST_CASE("simplex agrees with vertex enumeration on random networks") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const auto net = cybergen::testing::random_network(rng, 8);
    const auto sol = solve_fba(net);
    const auto vertices = enumerate_vertices(net);
    REQUIRE(sol.status == LpStatus::optimal);
    REQUIRE_FALSE(vertices.empty());
    CHECK(sol.objective_value == doctest::Approx(best_vertex_objective(vertices)).epsilon(1e-8).scale(1.0));
    CHECK(steady_state_residual(net, sol) <= 1e-8);
    for (std::size_t j = 0; j < net.reactions.size(); ++j) {
      const double v = sol.fluxes.at(net.reactions[j].id);
      CHECK(v >= net.reactions[j].lower - 1e-9);
      CHECK(v <= net.reactions[j].upper + 1e-9);
    }
  }
}
