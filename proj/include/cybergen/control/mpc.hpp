#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cybergen/control/ocp.hpp"
#include "cybergen/estimation/estimator.hpp"

namespace cybergen::control {

/// State handed to the controller at each sample.
enum class Feedback {
  plant_state,            // exact plant state
  measured_and_estimated, // measured external states plus estimated intracellular states
  estimate,               // full estimator output
};

std::string to_string(Feedback f);
Feedback feedback_from_string(const std::string& s);

struct MpcOptions {
  Feedback feedback = Feedback::plant_state;
  estimation::NoiseSpec noise;  // measurement noise, used when an estimator is given
  bool warm_start = true;       // seed each solve with the shifted previous plan
};

struct ClosedLoopSample {
  std::size_t index = 0;
  double t = 0.0;
  Eigen::VectorXd plant_state;
  Eigen::VectorXd measurement;  // empty without an estimator
  Eigen::VectorXd estimate;     // empty without an estimator
  Eigen::VectorXd fed_back;
  Eigen::VectorXd input;        // first interval of this sample's plan
  double predicted_objective = 0.0;
  int iterations = 0;
  int estimator_iterations = 0;
};

struct ClosedLoopRecord {
  std::vector<ClosedLoopSample> samples;
  model::HybridModel::Result plant;  // fine-grained plant trajectory
  Eigen::VectorXd final_state;
  Eigen::MatrixXd applied;           // n_intervals x channels
};

class ClosedLoopError : public std::runtime_error {
 public:
  ClosedLoopError(const std::string& what, std::size_t sample) : std::runtime_error(what), sample_(sample) {}
  std::size_t sample() const { return sample_; }

 private:
  std::size_t sample_;
};

/// Shrinking-horizon MPC: at every interval edge the controller's problem is
/// re-solved from the fed-back state and the first interval is applied to
/// the plant. With an estimator, the plant is measured (with noise) at each
/// sample and the estimator runs on its growing window first.
ClosedLoopRecord run_mpc(const ControlProblem& problem, const model::HybridModelSpec& plant,
                         const Eigen::VectorXd& x0, const estimation::EstimationProblem* estimator = nullptr,
                         const MpcOptions& options = {});

/// The controller's t0 plan applied to the plant without feedback.
ClosedLoopRecord run_open_loop(const ControlProblem& problem, const model::HybridModelSpec& plant,
                               const Eigen::VectorXd& x0);

struct MetricsSummary {
  double final_titer = 0.0;                        // mmol/L
  std::optional<double> improvement_vs_baseline_pct;
  double glucose_depletion_pct = 0.0;
  std::size_t switch_interval = 0;
  std::optional<double> estimator_rmse;            // enzyme, mmol/g_b, after the first samples
};

/// Enzyme-trajectory RMSE over samples with index >= skip.
double estimator_rmse(const ClosedLoopRecord& r, std::size_t skip = 3, Eigen::Index enzyme = 0);

MetricsSummary summarize(const ClosedLoopRecord& r, double u_min, double u_max,
                         const ClosedLoopRecord* baseline = nullptr);

std::string metrics_json(const MetricsSummary& m);

/// Per-sample log: t, inputs, plant states, measurements and estimates.
void write_samples_csv(const ClosedLoopRecord& r, const model::HybridModel& m, const std::filesystem::path& path);

}  // namespace cybergen::control
