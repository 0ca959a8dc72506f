#include "cybergen/surrogate/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "cybergen/fba/fba.hpp"
#include "cybergen/parallel.hpp"

namespace cybergen::surrogate {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd_momentum;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string Hyperparameters::describe() const {
  std::ostringstream out;
  out << hidden_layers << "x" << neurons << " " << to_string(activation) << " lr=" << learning_rate;
  return out.str();
}

namespace {

MatrixXd feature_matrix(const SurrogateDataset& ds) {
  const auto rows = ds.feasible_only().rows;
  MatrixXd x(static_cast<Index>(rows.size()), static_cast<Index>(ds.feature_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < ds.feature_names.size(); ++c)
      x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r].features[c];
  return x;
}

MatrixXd label_matrix(const SurrogateDataset& ds) {
  const auto rows = ds.feasible_only().rows;
  MatrixXd y(static_cast<Index>(rows.size()), static_cast<Index>(ds.label_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < ds.label_names.size(); ++c)
      y(static_cast<Index>(r), static_cast<Index>(c)) = rows[r].labels[c];
  return y;
}

MatrixXd normalize(const MatrixXd& m, const ColumnStats& st) {
  return (m.rowwise() - st.mean.transpose()).array().rowwise() / st.stddev.transpose().array();
}

void set_domain(NeuralSurrogate& s, const MatrixXd& x, const MatrixXd& y) {
  s.feature_min = x.colwise().minCoeff().transpose();
  s.feature_max = x.colwise().maxCoeff().transpose();
  s.label_min = y.colwise().minCoeff().transpose();
  s.label_max = y.colwise().maxCoeff().transpose();
}

void check_hyper(const Hyperparameters& h) {
  if (h.hidden_layers < 0 || h.neurons < 1) throw std::invalid_argument("invalid network shape");
  if (!(h.learning_rate >= 0.0) || !(h.momentum >= 0.0 && h.momentum < 1.0))
    throw std::invalid_argument("learning rate must be >= 0 and momentum in [0, 1)");
  if (h.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (h.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (h.batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
}

constexpr int kMaxRedraws = 100;
constexpr int kMaxRestarts = 10;

// True when the network output does not vary over the rows of x_norm, which
// is where a ReLU stack ends up once every path from the input is inactive.
bool collapsed(const NeuralSurrogate& net, const MatrixXd& x_norm) {
  if (net.layers().front().activation != Activation::relu || x_norm.rows() < 2) return false;
  MatrixXd a = x_norm.transpose();
  for (const auto& layer : net.layers()) {
    MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    a = layer.activation == Activation::relu ? MatrixXd(z.cwiseMax(0.0)) : z;
  }
  const Eigen::ArrayXXd spread = a.colwise() - a.col(0);
  return (spread.abs() <= 1e-12).all();
}

}  // namespace

ColumnStats column_stats(const MatrixXd& columns) {
  ColumnStats st;
  const double n = static_cast<double>(columns.rows());
  st.mean = columns.colwise().mean().transpose();
  st.stddev.resize(columns.cols());
  for (Index c = 0; c < columns.cols(); ++c) {
    const double var = (columns.col(c).array() - st.mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    // Near-constant columns would blow up the normalized targets.
    st.stddev(c) = sd > 1e-12 * std::max(1.0, std::abs(st.mean(c))) ? sd : 1.0;
  }
  return st;
}

NeuralSurrogate train(const SurrogateDataset& train_set, const SurrogateDataset& validation_set,
                      const Hyperparameters& hyper, TrainReport* report) {
  check_hyper(hyper);
  const MatrixXd x_train = feature_matrix(train_set);
  const MatrixXd y_train = label_matrix(train_set);
  const MatrixXd x_val = feature_matrix(validation_set);
  const MatrixXd y_val = label_matrix(validation_set);
  if (x_train.rows() == 0 || x_val.rows() == 0) throw std::invalid_argument("train and validation splits must be non-empty");
  if (x_val.cols() != x_train.cols() || y_val.cols() != y_train.cols())
    throw std::invalid_argument("train and validation splits have different arity");

  std::vector<int> sizes{static_cast<int>(x_train.cols())};
  for (int l = 0; l < hyper.hidden_layers; ++l) sizes.push_back(hyper.neurons);
  sizes.push_back(static_cast<int>(y_train.cols()));

  std::seed_seq init_seq{hyper.seed, std::uint64_t{0x1e1}};
  std::seed_seq batch_seq{hyper.seed, std::uint64_t{0xba7c4}};
  std::mt19937_64 init_rng(init_seq);
  std::mt19937_64 batch_rng(batch_seq);
  const ColumnStats fstats = column_stats(x_train);
  const ColumnStats lstats = column_stats(y_train);
  const MatrixXd xn = normalize(x_train, fstats);
  const MatrixXd yn = normalize(y_train, lstats);

  const MatrixXd xv = normalize(x_val, fstats);
  const MatrixXd yv = normalize(y_val, lstats);
  const Index n = xn.rows();
  const Index batch = hyper.batch_size > 0 ? std::min<Index>(hyper.batch_size, n) : n;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  NeuralSurrogate net;
  VectorXd best;
  double best_val = 0.0;
  int best_epoch = 0;
  int epoch = 0;
  int restarts = 0;
  std::vector<double> train_hist;
  std::vector<double> val_hist;

  // A ReLU stack whose output ignores the input has a zero gradient forever.
  // Such draws are skipped, and a run that ends explaining less than half of
  // the label variance (stuck on that plateau) restarts from the next draw.
  const double mean_mse = yn.colwise().squaredNorm().sum() / static_cast<double>(yn.size());
  for (;; ++restarts) {
    net = NeuralSurrogate(sizes, hyper.activation, init_rng());
    for (int redraw = 0; redraw < kMaxRedraws && collapsed(net, xn); ++redraw)
      net = NeuralSurrogate(sizes, hyper.activation, init_rng());

    VectorXd theta = net.parameters();
    VectorXd velocity = VectorXd::Zero(theta.size());
    VectorXd second = VectorXd::Zero(theta.size());
    VectorXd grad;
    long updates = 0;
    best = theta;
    best_val = net.mse(xv, yv);
    best_epoch = 0;
    epoch = 0;
    int stale = 0;
    train_hist.clear();
    val_hist.clear();

    auto step = [&](const MatrixXd& xb, const MatrixXd& yb) {
      const double loss = net.mse(xb, yb, &grad);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
      ++updates;
      if (hyper.optimizer == Optimizer::adam) {
        constexpr double beta2 = 0.999;
        velocity = hyper.momentum * velocity + (1.0 - hyper.momentum) * grad;
        second = beta2 * second + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(hyper.momentum, static_cast<double>(updates));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(updates));
        theta -= (hyper.learning_rate / c1) *
                 velocity.cwiseQuotient(((second / c2).cwiseSqrt().array() + 1e-8).matrix());
      } else {
        velocity = hyper.momentum * velocity + grad;
        theta -= hyper.learning_rate * velocity;
      }
      net.set_parameters(theta);
    };

    while (epoch < hyper.max_epochs) {
      ++epoch;
      if (batch == n) {
        step(xn, yn);
      } else {
        std::shuffle(order.begin(), order.end(), batch_rng);
        for (Index start = 0; start < n; start += batch) {
          const Index len = std::min(batch, n - start);
          MatrixXd xb(len, xn.cols());
          MatrixXd yb(len, yn.cols());
          for (Index r = 0; r < len; ++r) {
            xb.row(r) = xn.row(order[static_cast<std::size_t>(start + r)]);
            yb.row(r) = yn.row(order[static_cast<std::size_t>(start + r)]);
          }
          step(xb, yb);
        }
      }
      const double train_loss = net.mse(xn, yn);
      const double val_loss = net.mse(xv, yv);
      if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch));
      train_hist.push_back(train_loss);
      val_hist.push_back(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        best = theta;
        best_epoch = epoch;
        stale = 0;
      } else if (++stale >= hyper.patience) {
        break;
      }
    }
    net.set_parameters(best);
    const bool failed = collapsed(net, xn) || (mean_mse > 0.0 && net.mse(xn, yn) > 0.5 * mean_mse);
    if (restarts + 1 >= kMaxRestarts || !failed || hyper.learning_rate == 0.0) break;
  }

  net.set_names(train_set.feature_names, train_set.label_names);
  net.feature_stats = fstats;
  net.label_stats = lstats;
  MatrixXd x_seen(x_train.rows() + x_val.rows(), x_train.cols());
  MatrixXd y_seen(y_train.rows() + y_val.rows(), y_train.cols());
  x_seen << x_train, x_val;
  y_seen << y_train, y_val;
  set_domain(net, x_seen, y_seen);
  net.metadata.seed = hyper.seed;
  net.metadata.epochs = epoch;
  net.metadata.best_epoch = best_epoch;
  net.metadata.train_mse = net.mse(xn, yn);
  net.metadata.validation_mse = best_val;

  if (report) {
    report->hyper = hyper;
    report->label_names = train_set.label_names;
    report->train_mse = net.metadata.train_mse;
    report->validation_mse = best_val;
    report->epochs_run = epoch;
    report->best_epoch = best_epoch;
    report->restarts = restarts;
    report->train_history = std::move(train_hist);
    report->validation_history = std::move(val_hist);
  }
  return net;
}

void fit_domain(NeuralSurrogate& s, const SurrogateDataset& ds) {
  const MatrixXd x = feature_matrix(ds);
  const MatrixXd y = label_matrix(ds);
  if (x.rows() == 0) throw std::invalid_argument("fit_domain: dataset has no feasible rows");
  if (x.cols() != static_cast<Index>(s.input_size()) || y.cols() != static_cast<Index>(s.output_size()))
    throw std::invalid_argument("fit_domain: dataset arity does not match the surrogate");
  set_domain(s, x, y);
}

SplitMetrics evaluate(const NeuralSurrogate& s, const SurrogateDataset& ds) {
  const MatrixXd x = feature_matrix(ds);
  const MatrixXd y = label_matrix(ds);
  if (x.rows() == 0) throw std::invalid_argument("evaluate: dataset has no feasible rows");
  MatrixXd pred(y.rows(), y.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const VectorXd e = x.row(r).transpose();
    pred.row(r) = s.predict(std::span<const double>(e.data(), static_cast<std::size_t>(e.size()))).transpose();
  }
  SplitMetrics m;
  const MatrixXd resid = pred - y;
  m.mse = (resid.array().rowwise() / s.label_stats.stddev.transpose().array()).square().mean();
  for (Index c = 0; c < y.cols(); ++c) {
    const double ss_res = resid.col(c).squaredNorm();
    const double ss_tot = (y.col(c).array() - y.col(c).mean()).square().sum();
    double r2 = 0.0;
    if (ss_tot > 0.0) r2 = 1.0 - ss_res / ss_tot;
    else r2 = ss_res <= 1e-20 * static_cast<double>(y.rows()) ? 1.0 : 0.0;
    m.r2.push_back(r2);
    m.max_abs_error.push_back(resid.col(c).cwiseAbs().maxCoeff());
  }
  return m;
}

NeuralSurrogate train_and_test(const DataSplit& split, const Hyperparameters& hyper, TrainReport& report) {
  NeuralSurrogate s = train(split.train, split.validation, hyper, &report);
  const SplitMetrics m = evaluate(s, split.test);
  report.test_mse = m.mse;
  report.test_r2 = m.r2;
  return s;
}

std::vector<Hyperparameters> default_hyper_grid(std::uint64_t seed) {
  std::vector<Hyperparameters> grid;
  for (Activation a : {Activation::relu, Activation::tanh})
    for (int layers : {1, 2, 3})
      for (int neurons : {3, 8, 16})
        for (double lr : {0.01, 0.001}) {
          Hyperparameters h;
          h.activation = a;
          h.hidden_layers = layers;
          h.neurons = neurons;
          h.learning_rate = lr;
          h.seed = seed;
          grid.push_back(h);
        }
  return grid;
}

std::vector<SearchCell> hyperparameter_search(const DataSplit& split, const std::vector<Hyperparameters>& grid,
                                              unsigned threads) {
  if (grid.empty()) throw std::invalid_argument("hyperparameter grid is empty");
  std::vector<SearchCell> cells(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t i) {
        cells[i].hyper = grid[i];
        try {
          TrainReport r;
          train_and_test(split, grid[i], r);
          cells[i].report = std::move(r);
        } catch (const std::exception& e) {
          cells[i].error = e.what();
        }
      },
      threads);
  std::stable_sort(cells.begin(), cells.end(), [](const SearchCell& a, const SearchCell& b) {
    if (a.report && b.report) return a.report->test_mse < b.report->test_mse;
    return a.report.has_value() && !b.report.has_value();
  });
  return cells;
}

double ParityReport::worst_relative_error() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < max_abs_error.size(); ++i) {
    const double range = label_range[i] > 0.0 ? label_range[i] : 1.0;
    worst = std::max(worst, max_abs_error[i] / range);
  }
  return worst;
}

ParityReport parity_check(const NeuralSurrogate& s, const fba::MetabolicNetwork& net,
                          const std::vector<std::string>& feature_reactions, const std::vector<LabelSpec>& labels,
                          const std::map<std::string, double>& k_cat, std::size_t samples, std::uint64_t seed) {
  if (feature_reactions.size() != s.input_size() || labels.size() != s.output_size())
    throw std::invalid_argument("parity_check: reaction lists do not match the surrogate");
  if (s.feature_min.size() != static_cast<Index>(s.input_size()))
    throw std::invalid_argument("parity_check: surrogate has no input domain");
  ParityReport rep;
  rep.samples = samples;
  for (const auto& l : labels) rep.label_names.push_back(l.name);
  rep.max_abs_error.assign(labels.size(), 0.0);
  for (std::size_t k = 0; k < labels.size(); ++k)
    rep.label_range.push_back(s.label_max(static_cast<Index>(k)) - s.label_min(static_cast<Index>(k)));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> e(s.input_size());
  std::vector<double> pred(s.output_size());
  for (std::size_t n = 0; n < samples; ++n) {
    fba::FluxAssignment pinned;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const auto k = static_cast<Index>(i);
      e[i] = s.feature_min(k) + unit(rng) * (s.feature_max(k) - s.feature_min(k));
      pinned[feature_reactions[i]] = e[i] * k_cat.at(feature_reactions[i]);
    }
    const auto sol = fba::solve_fba(net, pinned, k_cat);
    if (sol.status != fba::LpStatus::optimal) continue;
    s.evaluate(e, pred);
    for (std::size_t k = 0; k < labels.size(); ++k)
      rep.max_abs_error[k] = std::max(rep.max_abs_error[k], std::abs(pred[k] - sol.fluxes.at(labels[k].reaction_id)));
  }
  return rep;
}

}  // namespace cybergen::surrogate
