#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cybergen/control/mpc.hpp"
#include "cybergen/experiments/config.hpp"
#include "cybergen/fba/network.hpp"
#include "cybergen/surrogate/neural_surrogate.hpp"
#include "cybergen/surrogate/training.hpp"

namespace cybergen::experiments {

fba::MetabolicNetwork network(const ScenarioConfig& cfg);

/// Sweeps the CADA flux grid of the configured network.
surrogate::SurrogateDataset explore(const ScenarioConfig& cfg);

/// The configured dataset file, or a fresh sweep when none is named.
surrogate::SurrogateDataset dataset(const ScenarioConfig& cfg);

struct TrainedSurrogate {
  std::shared_ptr<surrogate::NeuralSurrogate> net;
  surrogate::TrainReport report;
};

/// Split and weight initialization use the split and training seed streams.
TrainedSurrogate train_surrogate(const ScenarioConfig& cfg, const surrogate::SurrogateDataset& ds);

std::vector<surrogate::SearchCell> hyper_search(const ScenarioConfig& cfg, const surrogate::SurrogateDataset& ds);
void write_search_table(const std::vector<surrogate::SearchCell>& cells, const std::filesystem::path& path);

/// Loads the configured artifact, or trains one from the dataset.
std::shared_ptr<const surrogate::NeuralSurrogate> obtain_surrogate(const ScenarioConfig& cfg);

model::HybridModelSpec plant_spec(const ScenarioConfig& cfg, std::shared_ptr<const surrogate::ExchangeSurrogate> s);

/// Controller problem; `mismatched` scales h by the configured factor.
control::ControlProblem controller_problem(const ScenarioConfig& cfg,
                                           std::shared_ptr<const surrogate::ExchangeSurrogate> s,
                                           bool mismatched);

Eigen::VectorXd initial_state(const ScenarioConfig& cfg, const model::HybridModel& m);

enum class Scenario { olo_mis, mpc_1, mpc_2 };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct ScenarioRun {
  Scenario scenario = Scenario::olo_mis;
  control::ClosedLoopRecord record;
  control::MetricsSummary metrics;
  std::optional<control::ClosedLoopRecord> baseline;  // OLO_mis, for the MPC scenarios
  std::uint64_t noise_seed = 0;
};

/// MPC scenarios also run OLO_mis on the same plant as their baseline,
/// unless one is passed in.
ScenarioRun run_scenario(const ScenarioConfig& cfg, Scenario scenario,
                         std::shared_ptr<const surrogate::ExchangeSurrogate> s,
                         const control::ClosedLoopRecord* baseline = nullptr);

/// trajectory.csv, samples.csv, metrics.json, config.toml and, with an
/// estimator, estimates.csv.
void write_scenario(const ScenarioRun& run, const ScenarioConfig& cfg,
                    std::shared_ptr<const surrogate::ExchangeSurrogate> s, const std::filesystem::path& dir);

std::string scenario_metrics_json(const ScenarioRun& run, const ScenarioConfig& cfg);

struct DesignPoint {
  double theta2 = 0.0;
  bool ok = false;
  std::string error;
  control::OcpSolution solution;
  model::HybridModel::Result trajectory;
  std::size_t switch_interval = 0;
  double switch_time = 0.0;
};

/// Optimal open-loop profile of the nominal model for every theta2 value.
/// A failing value is recorded and the sweep continues.
std::vector<DesignPoint> design_sweep(const ScenarioConfig& cfg, std::shared_ptr<const surrogate::ExchangeSurrogate> s);

/// design_summary.csv plus theta2_<i>.csv per point.
void write_design_sweep(const std::vector<DesignPoint>& points, const ScenarioConfig& cfg,
                        std::shared_ptr<const surrogate::ExchangeSurrogate> s, const std::filesystem::path& dir);

struct ReportRow {
  std::string run;  // path relative to the report directory
  std::string scenario;
  std::optional<std::uint64_t> seed;
  double final_titer = 0.0;
  std::optional<double> improvement_pct;
  double glucose_depletion_pct = 0.0;
  std::size_t switch_interval = 0;
  std::optional<double> estimator_rmse;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
};

/// Collects every metrics.json below `dir`, prints a comparison table and
/// writes report.csv into `dir`.
Report report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace cybergen::experiments
