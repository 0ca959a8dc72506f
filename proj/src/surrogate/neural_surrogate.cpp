#include "cybergen/surrogate/neural_surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cybergen::surrogate {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu" || name == "ReLU") return Activation::relu;
  if (name == "tanh" || name == "Tanh") return Activation::tanh;
  if (name == "sigmoid" || name == "Sigmoid") return Activation::sigmoid;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

namespace {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::identity: return z;
  }
  return z;
}

/// Derivative from the pre-activation z and the activation value a.
inline double activate_prime(Activation a, double z, double value) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - value * value;
    case Activation::sigmoid: return value * (1.0 - value);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

MatrixXd apply(Activation a, const MatrixXd& z) { return z.unaryExpr([a](double v) { return activate(a, v); }); }

MatrixXd apply_prime(Activation a, const MatrixXd& z, const MatrixXd& value) {
  MatrixXd d(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i) d(i, j) = activate_prime(a, z(i, j), value(i, j));
  return d;
}

struct ForwardTrace {
  std::vector<MatrixXd> pre;   // z_l
  std::vector<MatrixXd> post;  // a_l, post[0] = input
};

ForwardTrace trace(const std::vector<DenseLayer>& layers, const MatrixXd& input_cols) {
  ForwardTrace t;
  t.post.push_back(input_cols);
  for (const auto& layer : layers) {
    MatrixXd z = layer.weights * t.post.back();
    z.colwise() += layer.bias;
    t.post.push_back(apply(layer.activation, z));
    t.pre.push_back(std::move(z));
  }
  return t;
}

}  // namespace

NeuralSurrogate::NeuralSurrogate(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
  for (int s : layer_sizes)
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l - 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weights.resize(layer_sizes[l], fan_in);
    layer.bias.resize(layer_sizes[l]);
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = dist(rng);
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = dist(rng);
    layer.activation = l + 1 == layer_sizes.size() ? Activation::identity : hidden;
    layers_.push_back(std::move(layer));
  }
  max_width_ = *std::max_element(layer_sizes.begin(), layer_sizes.end());
  const auto n_in = static_cast<Index>(layer_sizes.front());
  const auto n_out = static_cast<Index>(layer_sizes.back());
  feature_stats = {VectorXd::Zero(n_in), VectorXd::Ones(n_in)};
  label_stats = {VectorXd::Zero(n_out), VectorXd::Ones(n_out)};
  metadata.seed = seed;
  for (Index i = 0; i < n_in; ++i) feature_names_.push_back("e_" + std::to_string(i));
  for (Index i = 0; i < n_out; ++i) label_names_.push_back("v_" + std::to_string(i));
}

std::size_t NeuralSurrogate::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t NeuralSurrogate::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows());
}

void NeuralSurrogate::set_names(std::vector<std::string> features, std::vector<std::string> labels) {
  if (features.size() != input_size() || labels.size() != output_size())
    throw std::invalid_argument("name lists do not match the layer sizes");
  feature_names_ = std::move(features);
  label_names_ = std::move(labels);
}

std::vector<int> NeuralSurrogate::layer_sizes() const {
  std::vector<int> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers_.front().weights.cols()));
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weights.rows()));
  return sizes;
}

void NeuralSurrogate::check_arity(std::size_t n) const {
  if (n != input_size())
    throw std::invalid_argument("surrogate expects " + std::to_string(input_size()) + " inputs, got " +
                                std::to_string(n));
}

void NeuralSurrogate::evaluate(std::span<const double> enzymes, std::span<double> fluxes) const {
  check_arity(enzymes.size());
  if (fluxes.size() != output_size()) throw std::invalid_argument("flux buffer has the wrong size");

  constexpr int kStackWidth = 64;
  double stack_a[kStackWidth];
  double stack_b[kStackWidth];
  std::vector<double> heap;
  double* cur = stack_a;
  double* nxt = stack_b;
  if (max_width_ > kStackWidth) {
    heap.resize(2 * static_cast<std::size_t>(max_width_));
    cur = heap.data();
    nxt = heap.data() + max_width_;
  }

  const bool clamp_in = feature_min.size() == static_cast<Index>(enzymes.size());
  for (std::size_t i = 0; i < enzymes.size(); ++i) {
    const auto k = static_cast<Index>(i);
    double e = enzymes[i];
    if (clamp_in) e = std::clamp(e, feature_min(k), feature_max(k));
    cur[i] = (e - feature_stats.mean(k)) / feature_stats.stddev(k);
  }
  for (const auto& layer : layers_) {
    const Index rows = layer.weights.rows();
    const Index cols = layer.weights.cols();
    for (Index r = 0; r < rows; ++r) {
      double z = layer.bias(r);
      for (Index c = 0; c < cols; ++c) z += layer.weights(r, c) * cur[c];
      nxt[r] = activate(layer.activation, z);
    }
    std::swap(cur, nxt);
  }
  const bool clamp_out = label_min.size() == static_cast<Index>(fluxes.size());
  for (std::size_t k = 0; k < fluxes.size(); ++k) {
    const auto i = static_cast<Index>(k);
    double v = cur[k] * label_stats.stddev(i) + label_stats.mean(i);
    if (clamp_out) v = std::clamp(v, label_min(i), label_max(i));
    fluxes[k] = v;
  }
}

VectorXd NeuralSurrogate::predict(std::span<const double> enzymes) const {
  VectorXd out(static_cast<Index>(output_size()));
  evaluate(enzymes, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

VectorXd NeuralSurrogate::normalize_features(std::span<const double> e) const {
  check_arity(e.size());
  VectorXd x(static_cast<Index>(e.size()));
  for (Index i = 0; i < x.size(); ++i)
    x(i) = (e[static_cast<std::size_t>(i)] - feature_stats.mean(i)) / feature_stats.stddev(i);
  return x;
}

VectorXd NeuralSurrogate::denormalize_labels(const VectorXd& y_norm) const {
  return y_norm.cwiseProduct(label_stats.stddev) + label_stats.mean;
}

VectorXd NeuralSurrogate::forward_normalized(const VectorXd& x) const {
  VectorXd a = x;
  for (const auto& layer : layers_) {
    VectorXd z = layer.weights * a + layer.bias;
    a = z.unaryExpr([&](double v) { return activate(layer.activation, v); });
  }
  return a;
}

VectorXd NeuralSurrogate::raw_predict(std::span<const double> enzymes) const {
  return denormalize_labels(forward_normalized(normalize_features(enzymes)));
}

MatrixXd NeuralSurrogate::input_jacobian(std::span<const double> enzymes) const {
  const auto t = trace(layers_, normalize_features(enzymes));
  // Chain rule from the input side: J = diag(s') W ... diag(s') W.
  MatrixXd jac = MatrixXd::Identity(static_cast<Index>(input_size()), static_cast<Index>(input_size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const MatrixXd d = apply_prime(layers_[l].activation, t.pre[l], t.post[l + 1]);
    jac = d.col(0).asDiagonal() * (layers_[l].weights * jac);
  }
  return label_stats.stddev.asDiagonal() * jac * feature_stats.stddev.cwiseInverse().asDiagonal();
}

MatrixXd NeuralSurrogate::parameter_jacobian(std::span<const double> enzymes) const {
  const auto t = trace(layers_, normalize_features(enzymes));
  const auto n_out = static_cast<Index>(output_size());
  MatrixXd jac(n_out, static_cast<Index>(parameter_count()));
  for (Index k = 0; k < n_out; ++k) {
    VectorXd delta = VectorXd::Zero(n_out);
    delta(k) = label_stats.stddev(k);
    std::vector<VectorXd> dw(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const MatrixXd d = apply_prime(layers_[l].activation, t.pre[l], t.post[l + 1]);
      delta = delta.cwiseProduct(d.col(0));
      dw[l] = delta;
      if (l > 0) delta = layers_[l].weights.transpose() * delta;
    }
    Index offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const VectorXd& a_prev = t.post[l].col(0);
      for (Index r = 0; r < layers_[l].weights.rows(); ++r)
        for (Index c = 0; c < layers_[l].weights.cols(); ++c) jac(k, offset++) = dw[l](r) * a_prev(c);
      for (Index r = 0; r < layers_[l].bias.size(); ++r) jac(k, offset++) = dw[l](r);
    }
  }
  return jac;
}

double NeuralSurrogate::mse(const MatrixXd& x_norm, const MatrixXd& y_norm, VectorXd* grad) const {
  if (x_norm.rows() != y_norm.rows() || x_norm.cols() != static_cast<Index>(input_size()) ||
      y_norm.cols() != static_cast<Index>(output_size()))
    throw std::invalid_argument("mse: batch shape mismatch");
  const auto t = trace(layers_, x_norm.transpose());
  const MatrixXd resid = t.post.back() - y_norm.transpose();
  const double count = static_cast<double>(resid.size());
  const double loss = resid.squaredNorm() / count;
  if (!grad) return loss;

  grad->resize(static_cast<Index>(parameter_count()));
  std::vector<MatrixXd> gw(layers_.size());
  std::vector<VectorXd> gb(layers_.size());
  MatrixXd delta = (2.0 / count) * resid;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    delta = delta.cwiseProduct(apply_prime(layers_[l].activation, t.pre[l], t.post[l + 1]));
    gw[l] = delta * t.post[l].transpose();
    gb[l] = delta.rowwise().sum();
    if (l > 0) delta = layers_[l].weights.transpose() * delta;
  }
  Index offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    for (Index r = 0; r < gw[l].rows(); ++r)
      for (Index c = 0; c < gw[l].cols(); ++c) (*grad)(offset++) = gw[l](r, c);
    for (Index r = 0; r < gb[l].size(); ++r) (*grad)(offset++) = gb[l](r);
  }
  return loss;
}

std::size_t NeuralSurrogate::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

VectorXd NeuralSurrogate::parameters() const {
  VectorXd theta(static_cast<Index>(parameter_count()));
  Index offset = 0;
  for (const auto& l : layers_) {
    for (Index r = 0; r < l.weights.rows(); ++r)
      for (Index c = 0; c < l.weights.cols(); ++c) theta(offset++) = l.weights(r, c);
    for (Index r = 0; r < l.bias.size(); ++r) theta(offset++) = l.bias(r);
  }
  return theta;
}

void NeuralSurrogate::set_parameters(const VectorXd& theta) {
  if (theta.size() != static_cast<Index>(parameter_count())) throw std::invalid_argument("parameter vector size mismatch");
  Index offset = 0;
  for (auto& l : layers_) {
    for (Index r = 0; r < l.weights.rows(); ++r)
      for (Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = theta(offset++);
    for (Index r = 0; r < l.bias.size(); ++r) l.bias(r) = theta(offset++);
  }
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json vec_to_json(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vec_from_json(const ordered_json& a) {
  if (!a.is_array()) throw std::invalid_argument("surrogate artifact: expected an array of numbers");
  VectorXd v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

std::string NeuralSurrogate::to_json() const {
  ordered_json doc;
  doc["format"] = "cybergen-surrogate/1";
  doc["layer_sizes"] = layer_sizes();
  ordered_json acts = ordered_json::array();
  for (const auto& l : layers_) acts.push_back(surrogate::to_string(l.activation));
  doc["activations"] = acts;
  ordered_json weights = ordered_json::array();
  ordered_json biases = ordered_json::array();
  for (const auto& l : layers_) {
    ordered_json w = ordered_json::array();
    for (Index r = 0; r < l.weights.rows(); ++r) w.push_back(vec_to_json(l.weights.row(r).transpose()));
    weights.push_back(std::move(w));
    biases.push_back(vec_to_json(l.bias));
  }
  doc["weights"] = weights;
  doc["biases"] = biases;
  doc["feature_names"] = feature_names_;
  doc["label_names"] = label_names_;
  doc["feature_mean"] = vec_to_json(feature_stats.mean);
  doc["feature_std"] = vec_to_json(feature_stats.stddev);
  doc["label_mean"] = vec_to_json(label_stats.mean);
  doc["label_std"] = vec_to_json(label_stats.stddev);
  doc["feature_min"] = vec_to_json(feature_min);
  doc["feature_max"] = vec_to_json(feature_max);
  doc["label_min"] = vec_to_json(label_min);
  doc["label_max"] = vec_to_json(label_max);
  doc["seed"] = metadata.seed;
  doc["training"] = {{"epochs", metadata.epochs},
                     {"best_epoch", metadata.best_epoch},
                     {"train_mse", metadata.train_mse},
                     {"validation_mse", metadata.validation_mse}};
  return doc.dump(2) + "\n";
}

NeuralSurrogate NeuralSurrogate::from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("surrogate artifact: ") + e.what());
  }
  try {
    NeuralSurrogate s;
    const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
    const auto& acts = doc.at("activations");
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (sizes.size() < 2 || acts.size() != sizes.size() - 1 || weights.size() != sizes.size() - 1 ||
        biases.size() != sizes.size() - 1)
      throw std::invalid_argument("surrogate artifact: inconsistent layer count");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer layer;
      layer.activation = activation_from_string(acts[l].get<std::string>());
      layer.weights.resize(sizes[l + 1], sizes[l]);
      if (weights[l].size() != static_cast<std::size_t>(sizes[l + 1]))
        throw std::invalid_argument("surrogate artifact: weight rows do not match layer size");
      for (Index r = 0; r < layer.weights.rows(); ++r) {
        const VectorXd row = vec_from_json(weights[l][static_cast<std::size_t>(r)]);
        if (row.size() != layer.weights.cols())
          throw std::invalid_argument("surrogate artifact: weight columns do not match layer size");
        layer.weights.row(r) = row.transpose();
      }
      layer.bias = vec_from_json(biases[l]);
      if (layer.bias.size() != sizes[l + 1]) throw std::invalid_argument("surrogate artifact: bias size mismatch");
      s.layers_.push_back(std::move(layer));
    }
    s.max_width_ = *std::max_element(sizes.begin(), sizes.end());
    s.feature_names_ = doc.at("feature_names").get<std::vector<std::string>>();
    s.label_names_ = doc.at("label_names").get<std::vector<std::string>>();
    s.feature_stats = {vec_from_json(doc.at("feature_mean")), vec_from_json(doc.at("feature_std"))};
    s.label_stats = {vec_from_json(doc.at("label_mean")), vec_from_json(doc.at("label_std"))};
    s.feature_min = vec_from_json(doc.at("feature_min"));
    s.feature_max = vec_from_json(doc.at("feature_max"));
    s.label_min = vec_from_json(doc.at("label_min"));
    s.label_max = vec_from_json(doc.at("label_max"));
    s.metadata.seed = doc.at("seed").get<std::uint64_t>();
    const auto& tr = doc.at("training");
    s.metadata.epochs = tr.at("epochs").get<int>();
    s.metadata.best_epoch = tr.at("best_epoch").get<int>();
    s.metadata.train_mse = tr.at("train_mse").get<double>();
    s.metadata.validation_mse = tr.at("validation_mse").get<double>();

    const auto n_in = static_cast<Index>(sizes.front());
    const auto n_out = static_cast<Index>(sizes.back());
    if (static_cast<Index>(s.feature_names_.size()) != n_in || static_cast<Index>(s.label_names_.size()) != n_out ||
        s.feature_stats.mean.size() != n_in || s.feature_stats.stddev.size() != n_in ||
        s.label_stats.mean.size() != n_out || s.label_stats.stddev.size() != n_out)
      throw std::invalid_argument("surrogate artifact: normalization arity mismatch");
    if ((s.feature_stats.stddev.array() <= 0.0).any() || (s.label_stats.stddev.array() <= 0.0).any())
      throw std::invalid_argument("surrogate artifact: normalization std must be positive");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("surrogate artifact: ") + e.what());
  }
}

void NeuralSurrogate::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json();
}

NeuralSurrogate NeuralSurrogate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open surrogate artifact " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace cybergen::surrogate
