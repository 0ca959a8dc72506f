#include "cybergen/experiments/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "cybergen/fba/itanet_mini.hpp"
#include "cybergen/surrogate/itanet_sweep.hpp"

namespace cybergen::experiments {

using model::HybridModel;
namespace fs = std::filesystem;

namespace {

double cada_kcat(const ScenarioConfig& cfg) {
  const auto it = cfg.kinetics.k_cat.find("CADA");
  if (it == cfg.kinetics.k_cat.end()) throw ConfigError("kinetics.k_cat needs a CADA entry");
  return it->second;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace

fba::MetabolicNetwork network(const ScenarioConfig& cfg) {
  fba::ItanetMiniRecipe recipe;
  recipe.acetate_per_growth = cfg.acetate_per_growth;
  return fba::resolve_network(cfg.network, recipe);
}

surrogate::SurrogateDataset explore(const ScenarioConfig& cfg) {
  auto opts = surrogate::itanet_sweep_options(cada_kcat(cfg));
  opts.threads = cfg.threads;
  return surrogate::sweep(network(cfg), surrogate::itanet_grid(cfg.grid_points, cfg.grid_max_flux), opts);
}

surrogate::SurrogateDataset dataset(const ScenarioConfig& cfg) {
  if (!cfg.dataset.empty()) return surrogate::read_dataset_csv(cfg.dataset);
  return explore(cfg);
}

TrainedSurrogate train_surrogate(const ScenarioConfig& cfg, const surrogate::SurrogateDataset& ds) {
  const auto parts = surrogate::split(ds, cfg.stream_seed(SeedStream::split));
  auto hyper = cfg.hyper;
  hyper.seed = cfg.stream_seed(SeedStream::training);
  TrainedSurrogate t;
  t.net = std::make_shared<surrogate::NeuralSurrogate>(surrogate::train_and_test(parts, hyper, t.report));
  surrogate::fit_domain(*t.net, ds);
  return t;
}

std::vector<surrogate::SearchCell> hyper_search(const ScenarioConfig& cfg, const surrogate::SurrogateDataset& ds) {
  const auto parts = surrogate::split(ds, cfg.stream_seed(SeedStream::split));
  return surrogate::hyperparameter_search(parts, surrogate::default_hyper_grid(cfg.stream_seed(SeedStream::training)),
                                          cfg.threads);
}

void write_search_table(const std::vector<surrogate::SearchCell>& cells, const fs::path& path) {
  auto out = open_out(path);
  out << "rank,hidden_layers,neurons,activation,learning_rate,train_mse,validation_mse,test_mse,min_test_r2,epochs,"
         "error\n";
  std::size_t rank = 1;
  for (const auto& c : cells) {
    out << rank++ << ',' << c.hyper.hidden_layers << ',' << c.hyper.neurons << ','
        << surrogate::to_string(c.hyper.activation) << ',' << c.hyper.learning_rate << ',';
    if (c.report) {
      const auto& r = *c.report;
      const double r2 = r.test_r2.empty() ? 0.0 : *std::min_element(r.test_r2.begin(), r.test_r2.end());
      out << r.train_mse << ',' << r.validation_mse << ',' << r.test_mse << ',' << r2 << ',' << r.epochs_run << ",\n";
    } else {
      std::string e = c.error;
      std::replace(e.begin(), e.end(), ',', ';');
      out << ",,,,," << e << '\n';
    }
  }
}

std::shared_ptr<const surrogate::NeuralSurrogate> obtain_surrogate(const ScenarioConfig& cfg) {
  if (!cfg.surrogate_artifact.empty())
    return std::make_shared<surrogate::NeuralSurrogate>(surrogate::NeuralSurrogate::load(cfg.surrogate_artifact));
  return train_surrogate(cfg, dataset(cfg)).net;
}

model::HybridModelSpec plant_spec(const ScenarioConfig& cfg, std::shared_ptr<const surrogate::ExchangeSurrogate> s) {
  model::HybridModelSpec spec;
  spec.params = cfg.kinetics;
  spec.cell = cfg.cell;
  spec.h_scale = 1.0;
  spec.surrogate = std::move(s);
  return spec;
}

control::ControlProblem controller_problem(const ScenarioConfig& cfg,
                                           std::shared_ptr<const surrogate::ExchangeSurrogate> s, bool mismatched) {
  control::ControlProblem p;
  p.model = plant_spec(cfg, std::move(s));
  if (mismatched) p.model.h_scale = cfg.mismatch;
  p.t0 = cfg.t0;
  p.tf = cfg.tf;
  p.n_intervals = cfg.n_intervals;
  p.u_min = cfg.u_min;
  p.u_max = cfg.u_max;
  p.integrator.dt = cfg.dt;
  p.solver = cfg.solver;
  p.threads = cfg.threads;
  return p;
}

Eigen::VectorXd initial_state(const ScenarioConfig& cfg, const HybridModel& m) {
  return m.initial_state(cfg.glc0, cfg.ita0, cfg.ace0, cfg.b0, cfg.e0);
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::olo_mis: return "OLO_mis";
    case Scenario::mpc_1: return "MPC_1";
    case Scenario::mpc_2: return "MPC_2";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "OLO_mis") return Scenario::olo_mis;
  if (name == "MPC_1") return Scenario::mpc_1;
  if (name == "MPC_2") return Scenario::mpc_2;
  throw std::invalid_argument("unknown scenario '" + name + "' (expected OLO_mis, MPC_1 or MPC_2)");
}

ScenarioRun run_scenario(const ScenarioConfig& cfg, Scenario scenario,
                         std::shared_ptr<const surrogate::ExchangeSurrogate> s,
                         const control::ClosedLoopRecord* baseline) {
  cfg.validate();
  const auto problem = controller_problem(cfg, s, true);
  const auto plant = plant_spec(cfg, s);
  const HybridModel plant_model(plant);
  const Eigen::VectorXd x0 = initial_state(cfg, plant_model);

  ScenarioRun run;
  run.scenario = scenario;
  run.noise_seed = cfg.noise_seed.value_or(cfg.stream_seed(SeedStream::noise));
  if (scenario == Scenario::olo_mis) {
    run.record = control::run_open_loop(problem, plant, x0);
    run.metrics = control::summarize(run.record, cfg.u_min, cfg.u_max);
    return run;
  }

  run.baseline = baseline ? *baseline : control::run_open_loop(problem, plant, x0);
  control::MpcOptions opts;
  if (scenario == Scenario::mpc_1) {
    run.record = control::run_mpc(problem, plant, x0, nullptr, opts);
  } else {
    auto est = estimation::EstimationProblem::full_information(problem.model, x0, cfg.estimator_p, cfg.estimator_r);
    if (cfg.estimator_window > 0) est.window = cfg.estimator_window;
    est.integrator.dt = cfg.dt;
    opts.feedback = control::Feedback::measured_and_estimated;
    opts.noise = {cfg.noise_std, run.noise_seed};
    run.record = control::run_mpc(problem, plant, x0, &est, opts);
  }
  run.metrics = control::summarize(run.record, cfg.u_min, cfg.u_max, &*run.baseline);
  return run;
}

std::string scenario_metrics_json(const ScenarioRun& run, const ScenarioConfig& cfg) {
  auto base = nlohmann::ordered_json::parse(control::metrics_json(run.metrics));
  nlohmann::ordered_json j;
  j["scenario"] = to_string(run.scenario);
  j["seed"] = cfg.seed;
  j["baseline"] = run.baseline ? nlohmann::ordered_json(to_string(Scenario::olo_mis)) : nullptr;
  if (run.baseline) j["baseline_final_titer"] = run.baseline->final_state[HybridModel::kIta];
  for (auto& [k, v] : base.items()) j[k] = v;
  if (run.scenario == Scenario::mpc_2) j["noise_seed"] = run.noise_seed;
  return j.dump(2) + "\n";
}

void write_scenario(const ScenarioRun& run, const ScenarioConfig& cfg,
                    std::shared_ptr<const surrogate::ExchangeSurrogate> s, const fs::path& dir) {
  fs::create_directories(dir);
  const HybridModel plant(plant_spec(cfg, std::move(s)));
  plant.write_csv(run.record.plant, dir / "trajectory.csv");
  control::write_samples_csv(run.record, plant, dir / "samples.csv");
  if (run.baseline) plant.write_csv(run.baseline->plant, dir / "baseline_trajectory.csv");
  std::vector<double> t;
  std::vector<Eigen::VectorXd> est;
  for (const auto& smp : run.record.samples) {
    if (smp.estimate.size() == 0) continue;
    t.push_back(smp.t);
    est.push_back(smp.estimate);
  }
  if (!est.empty()) estimation::write_estimates_csv(t, est, plant, dir / "estimates.csv");
  write_text(dir / "metrics.json", scenario_metrics_json(run, cfg));
  write_text(dir / "config.toml", cfg.to_toml());
}

std::vector<DesignPoint> design_sweep(const ScenarioConfig& cfg,
                                      std::shared_ptr<const surrogate::ExchangeSurrogate> s) {
  if (cfg.theta2_values.empty()) throw ConfigError("design.theta2 must not be empty");
  std::vector<DesignPoint> points;
  for (double theta2 : cfg.theta2_values) {
    DesignPoint pt;
    pt.theta2 = theta2;
    try {
      auto c = cfg;
      c.kinetics.theta2 = theta2;
      auto problem = controller_problem(c, s, false);
      const HybridModel m(problem.model);
      const Eigen::VectorXd x0 = initial_state(c, m);
      pt.solution = control::solve_ocp(problem, x0);
      pt.trajectory = m.simulate(x0, pt.solution.profile, problem.integrator);
      pt.switch_interval = control::switch_interval(pt.solution.profile.values.col(0), c.u_min, c.u_max);
      const auto edges = problem.edges();
      pt.switch_time = edges[std::min(pt.switch_interval, edges.size() - 1)];
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    points.push_back(std::move(pt));
  }
  return points;
}

void write_design_sweep(const std::vector<DesignPoint>& points, const ScenarioConfig& cfg,
                        std::shared_ptr<const surrogate::ExchangeSurrogate> s, const fs::path& dir) {
  fs::create_directories(dir);
  const HybridModel m(plant_spec(cfg, std::move(s)));
  auto out = open_out(dir / "design_summary.csv");
  out << "index,theta2,status,objective,switch_interval,switch_time,final_enzyme,error\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out << i << ',' << p.theta2 << ',' << (p.ok ? "ok" : "failed") << ',';
    if (p.ok) {
      m.write_csv(p.trajectory, dir / ("theta2_" + std::to_string(i) + ".csv"));
      out << p.solution.objective << ',' << p.switch_interval << ',' << p.switch_time << ','
          << p.trajectory.x.back()[HybridModel::kEnzyme] << ",\n";
    } else {
      std::string e = p.error;
      std::replace(e.begin(), e.end(), ',', ';');
      std::replace(e.begin(), e.end(), '\n', ' ');
      out << ",,,," << e << '\n';
    }
  }
  write_text(dir / "config.toml", cfg.to_toml());
}

Report report(const fs::path& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "metrics.json") found.push_back(entry.path());
  std::sort(found.begin(), found.end());

  Report rep;
  if (found.empty()) {
    out << "no runs found in " << dir.string() << '\n';
    return rep;
  }
  for (const auto& path : found) {
    std::ifstream in(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      rep.warnings.push_back("skipping unreadable " + path.string() + ": " + e.what());
      continue;
    }
    ReportRow row;
    row.run = fs::relative(path.parent_path(), dir).generic_string();
    if (row.run == ".") row.run = dir.filename().string();
    row.scenario = j.value("scenario", std::string("?"));
    row.final_titer = j.value("final_titer", 0.0);
    if (j.contains("improvement_vs_baseline_pct") && !j["improvement_vs_baseline_pct"].is_null())
      row.improvement_pct = j["improvement_vs_baseline_pct"].get<double>();
    row.glucose_depletion_pct = j.value("glucose_depletion_pct", 0.0);
    row.switch_interval = j.value("switch_interval", std::size_t{0});
    if (j.contains("estimator_rmse")) row.estimator_rmse = j["estimator_rmse"].get<double>();
    const fs::path snapshot = path.parent_path() / "config.toml";
    if (fs::exists(snapshot)) {
      try {
        const auto t = toml::parse_file(snapshot.string());
        if (auto v = t["seed"].value<std::int64_t>()) row.seed = static_cast<std::uint64_t>(*v);
      } catch (const toml::parse_error&) {
        rep.warnings.push_back("unreadable config snapshot " + snapshot.string());
      }
    } else if (j.contains("seed")) {
      row.seed = j["seed"].get<std::uint64_t>();
    }
    rep.rows.push_back(std::move(row));
  }

  std::set<std::uint64_t> seeds;
  bool missing_seed = false;
  for (const auto& r : rep.rows) {
    if (r.seed)
      seeds.insert(*r.seed);
    else
      missing_seed = true;
  }
  if (seeds.size() > 1) {
    std::string list;
    for (auto s : seeds) list += (list.empty() ? "" : ", ") + std::to_string(s);
    rep.warnings.push_back("runs use different seeds (" + list + "); comparisons across them are not paired");
  }
  if (missing_seed && !seeds.empty()) rep.warnings.push_back("some runs have no recorded seed");

  auto csv = open_out(dir / "report.csv");
  csv << "run,scenario,seed,final_titer,improvement_vs_baseline_pct,glucose_depletion_pct,switch_interval,"
         "estimator_rmse\n";
  out << std::left << std::setw(24) << "run" << std::setw(10) << "scenario" << std::right << std::setw(8) << "seed"
      << std::setw(12) << "titer" << std::setw(12) << "improv_%" << std::setw(12) << "depl_%" << std::setw(8)
      << "switch" << std::setw(14) << "est_rmse" << '\n';
  out << std::fixed;
  for (const auto& r : rep.rows) {
    csv << r.run << ',' << r.scenario << ',';
    if (r.seed) csv << *r.seed;
    csv << ',' << r.final_titer << ',';
    if (r.improvement_pct) csv << *r.improvement_pct;
    csv << ',' << r.glucose_depletion_pct << ',' << r.switch_interval << ',';
    if (r.estimator_rmse) csv << *r.estimator_rmse;
    csv << '\n';

    out << std::left << std::setw(24) << r.run << std::setw(10) << r.scenario << std::right << std::setw(8)
        << (r.seed ? std::to_string(*r.seed) : "-") << std::setw(12) << std::setprecision(3) << r.final_titer
        << std::setw(12);
    if (r.improvement_pct)
      out << std::setprecision(2) << *r.improvement_pct;
    else
      out << "-";
    out << std::setw(12) << std::setprecision(1) << r.glucose_depletion_pct << std::setw(8) << r.switch_interval
        << std::setw(14);
    if (r.estimator_rmse)
      out << std::scientific << std::setprecision(3) << *r.estimator_rmse << std::fixed;
    else
      out << "-";
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
  for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
  return rep;
}

}  // namespace cybergen::experiments
