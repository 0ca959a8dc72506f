#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cybergen/fba/network.hpp"
#include "cybergen/surrogate/dataset.hpp"
#include "cybergen/surrogate/neural_surrogate.hpp"

namespace cybergen::surrogate {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Optimizer { sgd_momentum, adam };

const char* to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& name);

struct Hyperparameters {
  int hidden_layers = 2;
  int neurons = 3;
  Activation activation = Activation::relu;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::adam;
  double momentum = 0.9;  // SGD momentum, or Adam's first-moment decay
  int patience = 30;
  int max_epochs = 5000;
  int batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;

  std::string describe() const;
};

/// Scores of a surrogate on one dataset split.
struct SplitMetrics {
  double mse = 0.0;                // mean over labels, normalized units
  std::vector<double> r2;          // per label, physical units
  std::vector<double> max_abs_error;
};

struct TrainReport {
  Hyperparameters hyper;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double test_mse = 0.0;  // only meaningful when a test split was evaluated
  std::vector<std::string> label_names;
  std::vector<double> test_r2;
  int epochs_run = 0;
  int best_epoch = 0;
  int restarts = 0;  // runs discarded because a ReLU layer died
  std::vector<double> train_history;
  std::vector<double> validation_history;
};

/// Fits z-score statistics on `train` and minimizes the normalized MSE with
/// full-batch Adam (or momentum SGD). After every epoch the validation MSE is recorded; training
/// stops after `patience` epochs without improvement and the best snapshot
/// is returned. The clamp domain is set to the train and validation rows.
/// Throws DivergenceError on a non-finite loss and std::invalid_argument for
/// empty splits or invalid hyperparameters.
NeuralSurrogate train(const SurrogateDataset& train_set, const SurrogateDataset& validation_set,
                      const Hyperparameters& hyper, TrainReport* report = nullptr);

/// Widens the surrogate's input and output clamp ranges to the feasible rows
/// of `ds`.
void fit_domain(NeuralSurrogate& s, const SurrogateDataset& ds);

SplitMetrics evaluate(const NeuralSurrogate& s, const SurrogateDataset& ds);

/// Column statistics with population standard deviation; constant columns
/// get a standard deviation of 1.
ColumnStats column_stats(const Eigen::MatrixXd& columns);

/// Trains on split.train / split.validation, scores on split.test and fills
/// the test fields of the report.
NeuralSurrogate train_and_test(const DataSplit& split, const Hyperparameters& hyper, TrainReport& report);

struct SearchCell {
  Hyperparameters hyper;
  std::optional<TrainReport> report;
  std::string error;  // set when training failed
};

/// Activations {relu, tanh} x hidden layers {1, 2, 3} x neurons {3, 8, 16}
/// x learning rates {0.01, 0.001}, all with `seed`.
std::vector<Hyperparameters> default_hyper_grid(std::uint64_t seed);

/// Trains every cell on the same split, concurrently, and returns the cells
/// ranked by test MSE. Failed cells are kept and sorted last.
std::vector<SearchCell> hyperparameter_search(const DataSplit& split, const std::vector<Hyperparameters>& grid,
                                              unsigned threads = 0);

struct ParityReport {
  std::vector<std::string> label_names;
  std::vector<double> max_abs_error;
  std::vector<double> label_range;
  std::size_t samples = 0;

  /// Largest max_abs_error / label_range over the labels.
  double worst_relative_error() const;
};

/// Draws `samples` enzyme vectors uniformly inside the surrogate's input
/// domain, solves the pinned FBA problem for each and compares the fluxes
/// with the surrogate prediction. `labels` maps every surrogate label to its
/// reaction and `features` every input to its manipulatable reaction.
ParityReport parity_check(const NeuralSurrogate& s, const fba::MetabolicNetwork& net,
                          const std::vector<std::string>& feature_reactions, const std::vector<LabelSpec>& labels,
                          const std::map<std::string, double>& k_cat, std::size_t samples, std::uint64_t seed);

}  // namespace cybergen::surrogate
