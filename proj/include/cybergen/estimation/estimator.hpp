#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cybergen/control/box_bfgs.hpp"
#include "cybergen/model/hybrid_model.hpp"

namespace cybergen::estimation {

/// Measured outputs are the external states z_glc, z_ita, z_ace and b.
inline constexpr Eigen::Index kMeasured = 4;

struct MeasurementRecord {
  double t = 0.0;      // h
  Eigen::VectorXd y;   // z_glc, z_ita, z_ace (mmol/L), b (g_b/L)
  Eigen::VectorXd u;   // input applied on [t, t + h_s), W/m^2
};

struct NoiseSpec {
  double std_fraction = 0.0;  // relative standard deviation
  std::uint64_t seed = 0;
};

/// y = z (1 + std_fraction g), g standard normal per component, seeded by
/// (seed, sample_index); negative draws are floored at 0.
MeasurementRecord measure(const Eigen::VectorXd& plant_state, double t, const Eigen::VectorXd& u,
                          const NoiseSpec& noise, std::uint64_t sample_index);

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimationProblem {
  model::HybridModelSpec model;  // the estimator's model
  std::size_t window = std::numeric_limits<std::size_t>::max();  // samples; max = full information
  Eigen::VectorXd P;       // diagonal arrival-cost weights, state order
  Eigen::VectorXd R;       // diagonal measurement weights
  Eigen::VectorXd Q;       // diagonal process-noise weights; empty disables the term
  Eigen::VectorXd prior;   // x-bar at the window start
  /// Per-state scaling of the decision variables; empty uses
  /// max(|prior|, 1) for external states and the kinetic plateau for enzymes.
  Eigen::VectorXd scale;
  std::vector<MeasurementRecord> records;
  std::vector<Eigen::VectorXd> smoothed;  // last smoothed states at the record times
  Eigen::VectorXd warm_start;             // last optimal window-start state

  model::IntegratorOptions integrator = model::HybridModel::default_options();
  control::BoxBfgsOptions solver;

  /// P = diag(p), R = diag(r) with the case-study dimensions.
  static EstimationProblem full_information(model::HybridModelSpec model, Eigen::VectorXd prior, double p = 10.0,
                                            double r = 1000.0);
  void validate() const;
};

struct ObjectiveTerms {
  double arrival = 0.0;
  double measurement = 0.0;
  double noise = 0.0;
  double total() const { return arrival + measurement + noise; }
};

struct Estimate {
  Eigen::VectorXd state;                  // at the last record time
  std::vector<double> t;
  std::vector<Eigen::VectorXd> smoothed;  // at each record time
  Eigen::VectorXd window_start;
  Eigen::MatrixXd w;                      // process noise per transition (columns), empty when disabled
  ObjectiveTerms terms;
  int iterations = 0;
  std::string status;
};

/// Evaluates the objective for a window-start state and optional noise
/// sequence (n_x x (records - 1)); fills the smoothed states when asked.
ObjectiveTerms estimation_objective(const EstimationProblem& prob, const Eigen::VectorXd& x_start,
                                    const Eigen::MatrixXd& w = {}, std::vector<Eigen::VectorXd>* smoothed = nullptr);

/// Minimizes the arrival, measurement and (optional) noise terms over the
/// window-start state and noise sequence with non-negative states. Enzyme
/// (and mRNA) levels are capped at their fully induced plateau.
Estimate estimate(const EstimationProblem& prob);

/// Appends a record; past the window length the oldest record is dropped and
/// the prior moves to the last smoothed state at the new window start.
void advance_window(EstimationProblem& prob, MeasurementRecord record);

/// Records the last estimate for warm starts and the arrival-cost handover.
void accept(EstimationProblem& prob, const Estimate& est);

void write_estimates_csv(const std::vector<double>& t, const std::vector<Eigen::VectorXd>& estimates,
                         const model::HybridModel& m, const std::filesystem::path& path);

}  // namespace cybergen::estimation
