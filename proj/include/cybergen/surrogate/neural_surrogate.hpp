#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cybergen/surrogate/exchange_surrogate.hpp"

namespace cybergen::surrogate {

enum class Activation { relu, tanh, sigmoid, identity };

const char* to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // n_out x n_in
  Eigen::VectorXd bias;
  Activation activation = Activation::identity;
};

/// Per-column z-score statistics.
struct ColumnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // > 0; constant columns get 1
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

/// Feedforward network a_l = sigma_l(W_l a_{l-1} + b_l) on z-scored data.
///
/// predict() normalizes the enzyme levels, runs the layer recursion and
/// denormalizes the outputs. Inputs are first clamped to the feature domain
/// seen during training and outputs are clamped to the label range of the
/// dataset, which keeps extrapolated fluxes physical (no negative growth).
/// The raw_* and *_jacobian members work on the unclamped map.
class NeuralSurrogate final : public ExchangeSurrogate {
 public:
  NeuralSurrogate() = default;

  /// Layer sizes [n_in, hidden..., n_out]; hidden layers use `hidden`, the
  /// output layer is linear. Weights and biases are drawn uniformly from
  /// +-1/sqrt(fan_in).
  NeuralSurrogate(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed);

  std::size_t input_size() const override;
  std::size_t output_size() const override;
  const std::vector<std::string>& label_names() const override { return label_names_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  void set_names(std::vector<std::string> features, std::vector<std::string> labels);

  void evaluate(std::span<const double> enzymes, std::span<double> fluxes) const override;
  Eigen::VectorXd predict(std::span<const double> enzymes) const;

  /// Physical-units map without clamps.
  Eigen::VectorXd raw_predict(std::span<const double> enzymes) const;
  /// Network on already normalized inputs; returns normalized outputs.
  Eigen::VectorXd forward_normalized(const Eigen::VectorXd& x) const;

  /// d raw_predict / d enzymes  (n_out x n_in).
  Eigen::MatrixXd input_jacobian(std::span<const double> enzymes) const;
  /// d raw_predict / d parameters (n_out x parameter_count()), parameter
  /// order as in parameters().
  Eigen::MatrixXd parameter_jacobian(std::span<const double> enzymes) const;

  /// Mean squared error over every entry of the normalized batch
  /// (rows are samples) and, when `grad` is given, its exact gradient.
  double mse(const Eigen::MatrixXd& x_norm, const Eigen::MatrixXd& y_norm, Eigen::VectorXd* grad = nullptr) const;

  /// Flattened parameters: per layer, weights row-major then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<int> layer_sizes() const;

  ColumnStats feature_stats;
  ColumnStats label_stats;
  Eigen::VectorXd feature_min, feature_max;
  Eigen::VectorXd label_min, label_max;
  TrainingMetadata metadata;

  Eigen::VectorXd normalize_features(std::span<const double> e) const;
  Eigen::VectorXd denormalize_labels(const Eigen::VectorXd& y_norm) const;

  /// Artifact JSON: layer sizes, activations, row-major weights, biases,
  /// normalization, clamp ranges, names and training metadata.
  std::string to_json() const;
  static NeuralSurrogate from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static NeuralSurrogate load(const std::filesystem::path& path);

 private:
  void check_arity(std::size_t n) const;

  std::vector<DenseLayer> layers_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> label_names_;
  int max_width_ = 0;
};

}  // namespace cybergen::surrogate
