#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cybergen/experiments/pipeline.hpp"
#include "cybergen/fba/itanet_mini.hpp"
#include "itanet_exact.hpp"

using namespace cybergen;
using namespace cybergen::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cybergen_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 6 h batch on 20 mmol/L glucose with hourly samples
ScenarioConfig short_config() {
  ScenarioConfig c;
  c.tf = 6.0;
  c.n_intervals = 6;
  c.glc0 = 20.0;
  c.b0 = 0.2;
  return c;
}

struct EnvSeed {
  explicit EnvSeed(const char* v) {
    if (const char* old = std::getenv("CYBERGEN_SEED")) saved = old;
    if (v)
      setenv("CYBERGEN_SEED", v, 1);
    else
      unsetenv("CYBERGEN_SEED");
  }
  ~EnvSeed() {
    if (saved)
      setenv("CYBERGEN_SEED", saved->c_str(), 1);
    else
      unsetenv("CYBERGEN_SEED");
  }
  std::optional<std::string> saved;
};

}  // namespace

TEST_CASE("config defaults describe the case study") {
  const ScenarioConfig c;
  CHECK(c.glc0 == 120.0);
  CHECK(c.b0 == 0.05);
  CHECK(c.tf == 24.0);
  CHECK(c.n_intervals == 24);
  CHECK(c.u_max == 5.0);
  CHECK(c.mismatch == 1.04);
  CHECK(c.theta2_values.size() == 6);
  CHECK(c.network == fba::kBundledItanetMini);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config parses overrides and round-trips") {
  const auto c = ScenarioConfig::from_toml(R"(
seed = 7
[horizon]
tf = 12
n_intervals = 12
[mismatch]
factor = 1.1
[noise]
std_fraction = 0.02
seed = 99
[kinetics]
cell = "eukaryote"
theta2 = 3.0e-5
[kinetics.k_cat]
CADA = 60000
[kinetics.eukaryote]
d_p = 5.0
[design]
theta2 = [3.0e-5, 2.0e-5]
[surrogate]
activation = "tanh"
optimizer = "sgd"
)");
  CHECK(c.seed == 7);
  CHECK(c.seed_given);
  CHECK(c.tf == 12.0);
  CHECK(c.n_intervals == 12);
  CHECK(c.mismatch == 1.1);
  CHECK(c.noise_std == 0.02);
  REQUIRE(c.noise_seed);
  CHECK(*c.noise_seed == 99);
  CHECK(c.cell == model::CellType::eukaryote);
  CHECK(c.kinetics.theta2 == 3.0e-5);
  CHECK(c.kinetics.k_cat.at("CADA") == 60000.0);
  CHECK(c.kinetics.eukaryote.d_p == 5.0);
  CHECK(c.theta2_values == std::vector<double>{3.0e-5, 2.0e-5});
  CHECK(c.hyper.activation == surrogate::Activation::tanh);
  CHECK(c.hyper.optimizer == surrogate::Optimizer::sgd_momentum);

  const auto back = ScenarioConfig::from_toml(c.to_toml());
  CHECK(back.to_toml() == c.to_toml());
  CHECK(back.kinetics.theta2 == c.kinetics.theta2);
  CHECK(back.theta2_values == c.theta2_values);
  CHECK(*back.noise_seed == 99);
  CHECK(ScenarioConfig::from_toml(ScenarioConfig{}.to_toml()).to_toml() == ScenarioConfig{}.to_toml());
}

TEST_CASE("config rejects unknown keys, wrong types and bad values") {
  CHECK_THROWS_AS(ScenarioConfig::from_toml("colour = 1"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[horizon]\nlength = 3"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[kinetics.eukaryote]\nk_tx = 1"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[horizon]\nn_intervals = 2.5"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[horizon]\ntf = \"long\""), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("seed = -1"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[mismatch]\nfactor = 0"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[kinetics]\ntheta5 = -1"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[kinetics]\ncell = \"archaeon\""), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[design]\ntheta2 = []"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[surrogate]\nartifact = \"/no/such/file.json\""), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[network]\npath = \"/no/such/net.json\""), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_toml("[horizon\n"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::load("/no/such/config.toml"), ConfigError);
}

TEST_CASE("config paths resolve against the file's directory") {
  const auto dir = scratch_dir("paths");
  fba::save_network(fba::itanet_mini(), dir / "net.json");
  std::ofstream(dir / "run.toml") << "[network]\npath = \"net.json\"\n";
  const auto c = ScenarioConfig::load(dir / "run.toml");
  CHECK(fs::equivalent(c.network, dir / "net.json"));
  CHECK_FALSE(c.seed_given);
  CHECK(network(c).num_reactions() == 6);
}

TEST_CASE("root seed resolution order") {
  {
    EnvSeed env(nullptr);
    CHECK(resolve_seed(std::nullopt, std::nullopt) == 42);
    CHECK(resolve_seed(std::nullopt, 5) == 5);
    CHECK(resolve_seed(3, 5) == 3);
  }
  {
    EnvSeed env("11");
    CHECK(resolve_seed(std::nullopt, std::nullopt) == 11);
    CHECK(resolve_seed(std::nullopt, 5) == 5);
    CHECK(resolve_seed(3, std::nullopt) == 3);
  }
  {
    EnvSeed env("eleven");
    CHECK_THROWS_AS(resolve_seed(std::nullopt, std::nullopt), ConfigError);
  }
}

TEST_CASE("seed streams are distinct and reproducible") {
  ScenarioConfig a, b;
  b.seed = 43;
  CHECK(a.stream_seed(SeedStream::split) == ScenarioConfig{}.stream_seed(SeedStream::split));
  CHECK(a.stream_seed(SeedStream::split) != a.stream_seed(SeedStream::training));
  CHECK(a.stream_seed(SeedStream::training) != a.stream_seed(SeedStream::noise));
  CHECK(a.stream_seed(SeedStream::noise) != b.stream_seed(SeedStream::noise));
}

TEST_CASE("bundled network file matches the generated network") {
  const fs::path file = fs::path(CYBERGEN_DATA_DIR) / "itanet-mini.json";
  REQUIRE(fs::exists(file));
  CHECK(slurp(file) == fba::to_json(fba::itanet_mini()));
  ScenarioConfig c;
  c.network = file.string();
  CHECK(explore(c).feasible_count() == 498);
}

TEST_CASE("explore covers the grid and flags infeasible points") {
  ScenarioConfig c;
  const auto ds = explore(c);
  CHECK(ds.rows.size() == 498);
  CHECK(ds.feasible_count() == 498);
  c.grid_points = 11;
  c.grid_max_flux = 5.0;
  const auto wide = explore(c);
  CHECK(wide.rows.size() == 11);
  // 3.476 is the carbon limit: 3.5, 4.0, 4.5 and 5.0 cannot be carried
  CHECK(wide.rows.size() - wide.feasible_count() == 4);
}

TEST_CASE("default training reaches near-perfect fit") {
  const ScenarioConfig c;
  const auto ds = explore(c);
  const auto t = train_surrogate(c, ds);
  REQUIRE(t.report.test_r2.size() == 3);
  for (double r2 : t.report.test_r2) CHECK(r2 >= 0.999);
  CHECK(t.report.hyper.seed == c.stream_seed(SeedStream::training));
  const auto again = train_surrogate(c, ds);
  CHECK(again.net->parameters() == t.net->parameters());

  const auto dir = scratch_dir("artifact");
  t.net->save(dir / "s.json");
  ScenarioConfig with_artifact = c;
  with_artifact.surrogate_artifact = (dir / "s.json").string();
  CHECK(obtain_surrogate(with_artifact)->parameters() == t.net->parameters());
}

TEST_CASE("scenario names") {
  for (auto s : {Scenario::olo_mis, Scenario::mpc_1, Scenario::mpc_2}) CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scenario_from_string("MPC_3"), std::invalid_argument);
}

TEST_CASE("controller problem carries the mismatch only when asked") {
  const auto c = short_config();
  const auto s = testing::itanet_exact();
  CHECK(controller_problem(c, s, true).model.h_scale == c.mismatch);
  CHECK(controller_problem(c, s, false).model.h_scale == 1.0);
  CHECK(plant_spec(c, s).h_scale == 1.0);
  CHECK(controller_problem(c, s, true).n_intervals == 6);
}

TEST_CASE("closed-loop scenarios are deterministic and isolate the noise stream") {
  auto c = short_config();
  const auto s = testing::itanet_exact();

  const auto olo = run_scenario(c, Scenario::olo_mis, s);
  CHECK_FALSE(olo.metrics.improvement_vs_baseline_pct);
  const auto m1 = run_scenario(c, Scenario::mpc_1, s, &olo.record);
  REQUIRE(m1.metrics.improvement_vs_baseline_pct);
  CHECK(*m1.metrics.improvement_vs_baseline_pct >= -1e-6);
  const auto m2 = run_scenario(c, Scenario::mpc_2, s, &olo.record);
  CHECK(m2.metrics.estimator_rmse);
  CHECK(m2.noise_seed == c.stream_seed(SeedStream::noise));

  const auto d1 = scratch_dir("det_a"), d2 = scratch_dir("det_b");
  write_scenario(m2, c, s, d1);
  write_scenario(run_scenario(c, Scenario::mpc_2, s, &olo.record), c, s, d2);
  for (const char* f : {"trajectory.csv", "samples.csv", "estimates.csv", "metrics.json", "config.toml"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));

  auto other = c;
  other.noise_seed = 12345;
  const auto m2b = run_scenario(other, Scenario::mpc_2, s, &olo.record);
  CHECK(m2b.noise_seed == 12345);
  CHECK(m2b.record.samples[1].measurement != m2.record.samples[1].measurement);
  const auto m1b = run_scenario(other, Scenario::mpc_1, s, &olo.record);
  CHECK(m1b.record.plant.x == m1.record.plant.x);
  CHECK(m1b.metrics.final_titer == m1.metrics.final_titer);
}

TEST_CASE("scenario output directory and report") {
  auto c = short_config();
  const auto s = testing::itanet_exact();
  const auto root = scratch_dir("report");

  std::ostringstream empty;
  const auto none = report(root, empty);
  CHECK(none.rows.empty());
  CHECK(empty.str().find("no runs") != std::string::npos);

  const auto olo = run_scenario(c, Scenario::olo_mis, s);
  write_scenario(olo, c, s, root / "OLO_mis");
  CHECK(fs::exists(root / "OLO_mis" / "trajectory.csv"));
  CHECK(fs::exists(root / "OLO_mis" / "samples.csv"));
  CHECK(fs::exists(root / "OLO_mis" / "metrics.json"));
  CHECK_FALSE(fs::exists(root / "OLO_mis" / "estimates.csv"));
  CHECK(ScenarioConfig::from_toml(slurp(root / "OLO_mis" / "config.toml")).to_toml() == c.to_toml());

  const auto m1 = run_scenario(c, Scenario::mpc_1, s, &olo.record);
  write_scenario(m1, c, s, root / "MPC_1");
  const auto m2 = run_scenario(c, Scenario::mpc_2, s, &olo.record);
  write_scenario(m2, c, s, root / "MPC_2");
  CHECK(fs::exists(root / "MPC_2" / "estimates.csv"));

  std::ostringstream out;
  const auto rep = report(root, out);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.warnings.empty());
  CHECK(fs::exists(root / "report.csv"));
  CHECK(out.str().find("MPC_2") != std::string::npos);
  for (const auto& r : rep.rows) {
    if (r.scenario == "MPC_1") CHECK(std::abs(r.final_titer - m1.metrics.final_titer) < 1e-9);
    if (r.scenario == "OLO_mis") CHECK_FALSE(r.improvement_pct);
  }

  auto c2 = c;
  c2.seed = 7;
  write_scenario(olo, c2, s, root / "other_seed");
  std::ostringstream mixed;
  const auto rep2 = report(root, mixed);
  CHECK(rep2.rows.size() == 4);
  REQUIRE(rep2.warnings.size() == 1);
  CHECK(mixed.str().find("different seeds") != std::string::npos);
}

TEST_CASE("design sweep records one point per value and keeps going on failure") {
  auto c = short_config();
  c.theta2_values = {3.674e-5};
  const auto pts = design_sweep(c, testing::itanet_exact());
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].ok);
  CHECK(pts[0].trajectory.t.back() == doctest::Approx(c.tf));

  c.theta2_values = {3.674e-5, 1.837e-5};
  const auto broken = std::make_shared<surrogate::FunctionSurrogate>(
      1, std::vector<std::string>{"v_bio", "v_ace", "v_ita"}, [](std::span<const double>, std::span<double> v) {
        for (auto& x : v) x = std::numeric_limits<double>::quiet_NaN();
      });
  const auto failed = design_sweep(c, broken);
  REQUIRE(failed.size() == 2);
  for (const auto& p : failed) {
    CHECK_FALSE(p.ok);
    CHECK_FALSE(p.error.empty());
  }
  const auto dir = scratch_dir("design");
  write_design_sweep(failed, c, broken, dir);
  const auto summary = slurp(dir / "design_summary.csv");
  CHECK(summary.find("failed") != std::string::npos);
}
