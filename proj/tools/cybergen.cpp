#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cybergen/control/mpc.hpp"
#include "cybergen/estimation/estimator.hpp"
#include "cybergen/experiments/pipeline.hpp"
#include "cybergen/fba/simplex.hpp"
#include "cybergen/model/integrator.hpp"
#include "cybergen/surrogate/dataset.hpp"
#include "cybergen/surrogate/training.hpp"

namespace fs = std::filesystem;
using namespace cybergen;
using experiments::ScenarioConfig;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string network;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML scenario config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "root seed (overrides the config and CYBERGEN_SEED)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--network", c.network, "network JSON file or bundled:itanet-mini");
}

ScenarioConfig resolve(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig{} : ScenarioConfig::load(c.config);
  cfg.seed = experiments::resolve_seed(c.seed, cfg.seed_given ? std::optional(cfg.seed) : std::nullopt);
  if (!c.network.empty()) cfg.network = c.network;
  cfg.validate();
  return cfg;
}

std::shared_ptr<const surrogate::NeuralSurrogate> surrogate_for(const ScenarioConfig& cfg) {
  if (cfg.surrogate_artifact.empty()) std::cerr << "no surrogate artifact configured; training one\n";
  return experiments::obtain_surrogate(cfg);
}

int cmd_explore(const Common& c) {
  const auto cfg = resolve(c);
  const auto ds = experiments::explore(cfg);
  fs::create_directories(c.out);
  surrogate::write_dataset_csv(ds, fs::path(c.out) / "dataset.csv");
  std::ofstream(fs::path(c.out) / "config.toml") << cfg.to_toml();
  const auto feasible = ds.feasible_count();
  std::cout << ds.rows.size() << " grid points, " << feasible << " feasible, " << ds.rows.size() - feasible
            << " infeasible\nwrote " << (fs::path(c.out) / "dataset.csv").string() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset_path, bool search) {
  auto cfg = resolve(c);
  if (!dataset_path.empty()) cfg.dataset = dataset_path;
  const auto ds = experiments::dataset(cfg);
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "config.toml") << cfg.to_toml();
  if (search) {
    const auto cells = experiments::hyper_search(cfg, ds);
    experiments::write_search_table(cells, fs::path(c.out) / "hyper_search.csv");
    std::cout << "ranked " << cells.size() << " configurations; best " << cells.front().hyper.describe();
    if (cells.front().report) std::cout << " test_mse=" << cells.front().report->test_mse;
    std::cout << "\nwrote " << (fs::path(c.out) / "hyper_search.csv").string() << '\n';
    return 0;
  }
  const auto t = experiments::train_surrogate(cfg, ds);
  t.net->save(fs::path(c.out) / "surrogate.json");
  const auto& r = t.report;
  std::cout << "architecture " << r.hyper.describe() << ", " << r.epochs_run << " epochs (best " << r.best_epoch
            << ")\nmse train " << r.train_mse << " validation " << r.validation_mse << " test " << r.test_mse << '\n';
  for (std::size_t i = 0; i < r.label_names.size() && i < r.test_r2.size(); ++i)
    std::cout << "  R2 " << r.label_names[i] << " = " << r.test_r2[i] << '\n';
  std::cout << "wrote " << (fs::path(c.out) / "surrogate.json").string() << '\n';
  return 0;
}

int cmd_design_sweep(const Common& c) {
  const auto cfg = resolve(c);
  const auto s = surrogate_for(cfg);
  const auto points = experiments::design_sweep(cfg, s);
  const fs::path dir = fs::path(c.out) / "design";
  experiments::write_design_sweep(points, cfg, s, dir);
  int failed = 0;
  for (const auto& p : points) {
    if (p.ok) {
      std::printf("theta2=%.4g  titer=%.3f  switch interval %zu (t=%.1f h)\n", p.theta2, p.solution.objective,
                  p.switch_interval, p.switch_time);
    } else {
      ++failed;
      std::printf("theta2=%.4g  FAILED: %s\n", p.theta2, p.error.c_str());
    }
  }
  std::cout << "wrote " << (dir / "design_summary.csv").string() << '\n';
  return failed ? 2 : 0;
}

int cmd_closed_loop(const Common& c, const std::string& scenario) {
  const auto cfg = resolve(c);
  std::vector<experiments::Scenario> list;
  if (scenario == "all")
    list = {experiments::Scenario::olo_mis, experiments::Scenario::mpc_1, experiments::Scenario::mpc_2};
  else
    list = {experiments::scenario_from_string(scenario)};
  const auto s = surrogate_for(cfg);
  std::optional<control::ClosedLoopRecord> baseline;
  for (auto sc : list) {
    const auto run = experiments::run_scenario(cfg, sc, s, baseline ? &*baseline : nullptr);
    if (sc == experiments::Scenario::olo_mis) baseline = run.record;
    const fs::path dir = fs::path(c.out) / experiments::to_string(sc);
    experiments::write_scenario(run, cfg, s, dir);
    std::cout << experiments::to_string(sc) << ": " << experiments::scenario_metrics_json(run, cfg);
    std::cout << "wrote " << dir.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid metabolic model, optimal light induction and estimation experiments"};
  app.require_subcommand(1);
  Common common;

  auto* explore = app.add_subcommand("explore", "sweep the FBA model over the enzyme grid");
  add_common(explore, common);

  auto* train = app.add_subcommand("train", "train the exchange-flux surrogate");
  add_common(train, common);
  std::string dataset_path;
  bool search = false;
  train->add_option("--dataset", dataset_path, "dataset CSV (default: fresh sweep)")->check(CLI::ExistingFile);
  train->add_flag("--hyper-search", search, "rank a grid of architectures instead of training one");

  auto* design = app.add_subcommand("design-sweep", "optimal open-loop profiles for each theta2 value");
  add_common(design, common);

  auto* closed = app.add_subcommand("closed-loop", "run OLO_mis, MPC_1, MPC_2 or all");
  add_common(closed, common);
  std::string scenario;
  closed->add_option("--scenario", scenario, "OLO_mis, MPC_1, MPC_2 or all")->required();

  auto* rep = app.add_subcommand("report", "compare the runs below a directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*explore) return cmd_explore(common);
    if (*train) return cmd_train(common, dataset_path, search);
    if (*design) return cmd_design_sweep(common);
    if (*closed) return cmd_closed_loop(common, scenario);
    if (*rep) {
      experiments::report(report_dir, std::cout);
      return 0;
    }
  } catch (const control::OcpError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const control::ClosedLoopError& e) {
    std::cerr << "solver failure at sample " << e.sample() << ": " << e.what() << '\n';
    return 2;
  } catch (const estimation::EstimationError& e) {
    std::cerr << "estimator failure: " << e.what() << '\n';
    return 2;
  } catch (const model::IntegrationError& e) {
    std::cerr << "integration failure: " << e.what() << '\n';
    return 2;
  } catch (const fba::NumericalFailure& e) {
    std::cerr << "LP failure: " << e.what() << '\n';
    return 2;
  } catch (const surrogate::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
