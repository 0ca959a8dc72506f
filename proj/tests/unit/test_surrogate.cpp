#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cybergen/fba/itanet_mini.hpp"
#include "cybergen/surrogate/itanet_sweep.hpp"
#include "cybergen/surrogate/training.hpp"

using namespace cybergen;
using namespace cybergen::surrogate;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const SurrogateDataset& itanet_dataset() {
  static const SurrogateDataset ds = sweep(fba::itanet_mini(), itanet_grid(), itanet_sweep_options());
  return ds;
}

double rel_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-8});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cybergen_" + name);
}

// Smallest |pre-activation| over the hidden layers at a normalized input.
double min_hidden_preactivation(const NeuralSurrogate& s, const VectorXd& x) {
  double smallest = INFINITY;
  VectorXd a = x;
  const auto& layers = s.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const VectorXd z = layers[l].weights * a + layers[l].bias;
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return smallest;
}

}  // namespace

TEST_CASE("sweep of the bundled network") {
  const auto& ds = itanet_dataset();
  REQUIRE(ds.rows.size() == 498);
  CHECK(ds.feasible_count() == 498);
  CHECK(ds.feature_names == std::vector<std::string>{"e_cadA"});
  CHECK(ds.label_names == std::vector<std::string>{"v_bio", "v_ace", "v_ita"});
  const auto net = fba::itanet_mini();
  for (const auto& row : ds.rows) {
    const double v = row.features[0] * kCadaKcat;
    CHECK(row.labels[2] == doctest::Approx(v).epsilon(1e-12));
    CHECK(std::abs(row.labels[0] - 0.277 * (1.0 - v / 3.476)) <= 1e-6);
    CHECK(row.labels[1] == doctest::Approx(0.5 * row.labels[0]).epsilon(1e-9));
  }
  CHECK(ds.rows.front().labels[0] == doctest::Approx(0.277).epsilon(1e-9));
  CHECK(std::abs(ds.rows.back().labels[0]) <= 1e-6);
  CHECK(ds.rows.back().features[0] == doctest::Approx(5.2476e-5).epsilon(1e-4));

  SUBCASE("every feasible row is reproduced by a fresh solve") {
    for (std::size_t j = 0; j < ds.rows.size(); j += 37) {
      const auto sol = fba::solve_fba(net, {{"CADA", ds.rows[j].features[0] * kCadaKcat}}, {{"CADA", kCadaKcat}});
      CHECK(std::abs(sol.fluxes.at("BIO") - ds.rows[j].labels[0]) <= 1e-8);
      CHECK(std::abs(sol.fluxes.at("ITA_ex") - ds.rows[j].labels[2]) <= 1e-8);
    }
  }
}

TEST_CASE("sweep flags points beyond the carbon limit") {
  GridSpec grid{{GridAxis{"CADA", {0.0, 1.0, 5.0}}}};
  const auto ds = sweep(fba::itanet_mini(), grid, itanet_sweep_options());
  REQUIRE(ds.rows.size() == 3);
  CHECK(ds.rows[0].feasible);
  CHECK(ds.rows[0].labels[0] == doctest::Approx(0.277));
  CHECK(ds.rows[0].labels[2] == 0.0);
  CHECK_FALSE(ds.rows[2].feasible);
  CHECK(ds.rows[2].labels.empty());
  CHECK(ds.rows[2].features[0] == doctest::Approx(5.0 / kCadaKcat));
}

TEST_CASE("sweep rejects bad grids") {
  const auto net = fba::itanet_mini();
  CHECK_THROWS_AS(sweep(net, GridSpec{}, itanet_sweep_options()), DatasetError);
  CHECK_THROWS_AS(sweep(net, GridSpec{{GridAxis{"CADA", {}}}}, itanet_sweep_options()), DatasetError);
  CHECK_THROWS_AS(sweep(net, GridSpec{{GridAxis{"CADA", {1.0, 0.5}}}}, itanet_sweep_options()), DatasetError);
  CHECK_THROWS_AS(sweep(net, GridSpec{{GridAxis{"BIO", {0.0}}}}, itanet_sweep_options()), DatasetError);
}

TEST_CASE("grid points enumerate the Cartesian product with the first axis slowest") {
  GridSpec g{{GridAxis{"a", {0, 1}}, GridAxis{"b", {10, 20, 30}}}};
  CHECK(g.size() == 6);
  CHECK(g.point(0) == std::vector<double>{0, 10});
  CHECK(g.point(2) == std::vector<double>{0, 30});
  CHECK(g.point(3) == std::vector<double>{1, 10});
  const auto v = linspace(0.0, 3.476, 498);
  CHECK(v.back() == 3.476);
  CHECK(v[1] == doctest::Approx(3.476 / 497));
}

TEST_CASE("dataset CSV round trip") {
  GridSpec grid{{GridAxis{"CADA", {0.0, 0.1234567890123, 5.0}}}};
  const auto ds = sweep(fba::itanet_mini(), grid, itanet_sweep_options());
  const auto path = temp_path("dataset.csv");
  write_dataset_csv(ds, path);
  const auto back = read_dataset_csv(path);
  CHECK(back.feature_names == ds.feature_names);
  CHECK(back.label_names == ds.label_names);
  REQUIRE(back.rows.size() == ds.rows.size());
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    CHECK(back.rows[i].feasible == ds.rows[i].feasible);
    CHECK(back.rows[i].features == ds.rows[i].features);
    CHECK(back.rows[i].labels == ds.rows[i].labels);
  }
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "e_cadA,v_bio,v_ace,v_ita,feasible");
  in.close();

  std::ofstream(path) << "e_cadA,v_bio,feasible\n0.1,abc,1\n";
  CHECK_THROWS_AS(read_dataset_csv(path), DatasetError);
  std::ofstream(path) << "e_cadA,v_bio,feasible\n0.1,0.2\n";
  CHECK_THROWS_AS(read_dataset_csv(path), DatasetError);
  std::filesystem::remove(path);
}

TEST_CASE("split partitions the feasible rows") {
  const auto& ds = itanet_dataset();
  const auto parts = split(ds, 7);
  CHECK(parts.test.rows.size() == 75);
  CHECK(parts.validation.rows.size() == 85);
  CHECK(parts.train.rows.size() == 338);

  std::multiset<double> seen;
  for (const auto* p : {&parts.train, &parts.validation, &parts.test})
    for (const auto& r : p->rows) seen.insert(r.features[0]);
  CHECK(seen.size() == 498);
  CHECK(std::set<double>(seen.begin(), seen.end()).size() == 498);

  const auto again = split(ds, 7);
  for (std::size_t i = 0; i < parts.test.rows.size(); ++i)
    CHECK(again.test.rows[i].features == parts.test.rows[i].features);

  SurrogateDataset small{ds.feature_names, ds.label_names, {ds.rows.begin(), ds.rows.begin() + 10}};
  const auto tiny = split(small, 3);
  CHECK(tiny.train.rows.size() + tiny.validation.rows.size() + tiny.test.rows.size() == 10);
  SurrogateDataset too_small{ds.feature_names, ds.label_names, {ds.rows.begin(), ds.rows.begin() + 9}};
  CHECK_THROWS_AS(split(too_small, 3), DatasetError);
}

TEST_CASE("normalization round trip") {
  NeuralSurrogate s({2, 4, 3}, Activation::tanh, 1);
  s.feature_stats = {VectorXd::Constant(2, 3e-5), VectorXd::Constant(2, 1.5e-5)};
  s.label_stats = {(VectorXd(3) << 0.1, 0.05, 1.7).finished(), (VectorXd(3) << 0.08, 0.04, 1.0).finished()};
  std::vector<double> e{1.234e-5, 4.5e-5};
  const VectorXd x = s.normalize_features(e);
  const VectorXd back = x.cwiseProduct(s.feature_stats.stddev) + s.feature_stats.mean;
  CHECK(std::abs(back(0) - e[0]) <= 1e-12);
  CHECK(std::abs(back(1) - e[1]) <= 1e-12);
  const VectorXd y = (VectorXd(3) << 0.2, 0.1, 3.0).finished();
  const VectorXd yn = (y - s.label_stats.mean).cwiseQuotient(s.label_stats.stddev);
  CHECK((s.denormalize_labels(yn) - y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("backpropagation matches central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Activation act : {Activation::relu, Activation::tanh, Activation::sigmoid}) {
    CAPTURE(to_string(act));
    NeuralSurrogate s({2, 5, 4, 3}, act, 99);
    s.feature_stats = {(VectorXd(2) << 2e-5, 1e-5).finished(), (VectorXd(2) << 1e-5, 2e-5).finished()};
    s.label_stats = {(VectorXd(3) << 0.1, 0.05, 1.7).finished(), (VectorXd(3) << 0.08, 0.04, 1.0).finished()};
    MatrixXd X(20, 2);
    MatrixXd Y(20, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = g(rng);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = g(rng);
    bool kink_free = true;
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      kink_free = kink_free && min_hidden_preactivation(s, X.row(r).transpose()) > 1e-3;
    if (act == Activation::relu && !kink_free) continue;

    VectorXd grad;
    s.mse(X, Y, &grad);
    const VectorXd theta = s.parameters();
    VectorXd fd(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
      VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      NeuralSurrogate a = s, b = s;
      a.set_parameters(tp);
      b.set_parameters(tm);
      fd(k) = (a.mse(X, Y) - b.mse(X, Y)) / (2 * h);
    }
    CHECK(rel_error(grad, fd) <= 1e-5);

    // Output Jacobians at a few interior points.
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> e{2e-5 + 1e-5 * g(rng), 1e-5 + 2e-5 * g(rng)};
      if (act == Activation::relu && min_hidden_preactivation(s, s.normalize_features(e)) <= 1e-3) continue;
      const MatrixXd J = s.input_jacobian(e);
      MatrixXd Jfd(3, 2);
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6 * s.feature_stats.stddev(i);
        auto ep = e, em = e;
        ep[static_cast<std::size_t>(i)] += h;
        em[static_cast<std::size_t>(i)] -= h;
        Jfd.col(i) = (s.raw_predict(ep) - s.raw_predict(em)) / (2 * h);
      }
      CHECK(rel_error(J, Jfd) <= 1e-5);

      const MatrixXd P = s.parameter_jacobian(e);
      MatrixXd Pfd(3, theta.size());
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta(k)));
        VectorXd tp = theta, tm = theta;
        tp(k) += h;
        tm(k) -= h;
        NeuralSurrogate a = s, b = s;
        a.set_parameters(tp);
        b.set_parameters(tm);
        Pfd.col(k) = (a.raw_predict(e) - b.raw_predict(e)) / (2 * h);
      }
      CHECK(rel_error(P, Pfd) <= 1e-5);
    }
  }
}

TEST_CASE("degenerate networks have closed-form gradients") {
  SUBCASE("zero weights with ReLU give a zero input gradient") {
    NeuralSurrogate s({1, 3, 3, 2}, Activation::relu, 5);
    s.set_parameters(VectorXd::Zero(static_cast<Eigen::Index>(s.parameter_count())));
    std::vector<double> e{0.3};
    CHECK(s.input_jacobian(e).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("a single linear layer has its weight matrix as gradient") {
    NeuralSurrogate s({3, 2}, Activation::identity, 5);
    std::vector<double> e{0.1, -0.4, 2.0};
    CHECK((s.input_jacobian(e) - s.layers()[0].weights).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("predict clamps inputs and outputs to the data domain") {
  NeuralSurrogate s({1, 2}, Activation::identity, 0);
  s.set_parameters((VectorXd(4) << 1.0, -1.0, 0.0, 0.0).finished());
  s.feature_min = VectorXd::Constant(1, 0.0);
  s.feature_max = VectorXd::Constant(1, 5.248e-5);
  s.label_min = (VectorXd(2) << 0.0, -1e-4).finished();
  s.label_max = (VectorXd(2) << 5.0e-5, 0.0).finished();
  std::vector<double> beyond{1e-4};
  std::vector<double> edge{5.248e-5};
  const VectorXd a = s.predict(beyond);
  CHECK(a(0) == 5.0e-5);         // output clamp
  CHECK(a(1) == -5.248e-5);      // input clamped before the map
  CHECK(s.raw_predict(beyond)(1) == doctest::Approx(-1e-4));
  CHECK(s.predict(edge)(1) == s.predict(beyond)(1));
  std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(s.predict(wrong), std::invalid_argument);
}

TEST_CASE("surrogate artifact round trips bit-exactly") {
  NeuralSurrogate s({1, 3, 3, 3}, Activation::relu, 42);
  s.feature_stats = {VectorXd::Constant(1, 2.6e-5), VectorXd::Constant(1, 1.5e-5)};
  s.label_stats = {(VectorXd(3) << 0.1385, 0.069, 1.738).finished(), (VectorXd(3) << 0.08, 0.04, 1.003).finished()};
  s.feature_min = VectorXd::Constant(1, 0.0);
  s.feature_max = VectorXd::Constant(1, 3.476 / 66240.0);
  s.label_min = VectorXd::Zero(3);
  s.label_max = (VectorXd(3) << 0.277, 0.1385, 3.476).finished();
  s.set_names({"e_cadA"}, {"v_bio", "v_ace", "v_ita"});
  s.metadata.epochs = 12;
  s.metadata.train_mse = 1.0 / 3.0;
  const auto path = temp_path("surrogate.json");
  s.save(path);
  const auto back = NeuralSurrogate::load(path);
  CHECK(back.parameters() == s.parameters());
  CHECK(back.feature_stats.stddev == s.feature_stats.stddev);
  CHECK(back.label_stats.mean == s.label_stats.mean);
  CHECK(back.label_max == s.label_max);
  CHECK(back.label_names() == s.label_names());
  CHECK(back.metadata.train_mse == s.metadata.train_mse);
  CHECK(back.metadata.seed == 42);
  CHECK(back.to_json() == s.to_json());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(NeuralSurrogate::from_json("{"), std::invalid_argument);
  CHECK_THROWS_AS(NeuralSurrogate::from_json(R"({"layer_sizes":[1]})"), std::invalid_argument);
}

TEST_CASE("training edge cases") {
  const auto& ds = itanet_dataset();
  const auto parts = split(ds, 1);

  SUBCASE("zero learning rate leaves the weights at their initial values") {
    Hyperparameters h;
    h.learning_rate = 0.0;
    h.max_epochs = 50;
    TrainReport rep;
    const auto trained = train(parts.train, parts.validation, h, &rep);
    Hyperparameters h2 = h;
    h2.max_epochs = 1;
    const auto untouched = train(parts.train, parts.validation, h2);
    CHECK(trained.parameters() == untouched.parameters());
    CHECK(rep.best_epoch == 0);
    CHECK(rep.epochs_run == h.patience);
  }

  SUBCASE("constant labels are learned exactly") {
    SurrogateDataset flat = ds;
    for (auto& r : flat.rows) r.labels = {0.25, 0.125, 1.0};
    const auto p = split(flat, 2);
    Hyperparameters h;
    h.max_epochs = 2000;
    TrainReport rep;
    const auto s = train_and_test(p, h, rep);
    CHECK(rep.train_mse < 1e-8);
    std::vector<double> e{2e-5};
    CHECK(s.predict(e)(0) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(rep.test_r2[0] == 1.0);
  }

  SUBCASE("best epoch has the minimum validation loss") {
    Hyperparameters h;
    h.max_epochs = 300;
    TrainReport rep;
    train(parts.train, parts.validation, h, &rep);
    REQUIRE(rep.validation_history.size() == static_cast<std::size_t>(rep.epochs_run));
    const auto it = std::min_element(rep.validation_history.begin(), rep.validation_history.end());
    CHECK(rep.best_epoch == static_cast<int>(it - rep.validation_history.begin()) + 1);
    CHECK(rep.validation_mse == *it);
  }

  SUBCASE("invalid settings") {
    Hyperparameters h;
    h.patience = 0;
    CHECK_THROWS_AS(train(parts.train, parts.validation, h), std::invalid_argument);
    CHECK_THROWS_AS(train(parts.train, SurrogateDataset{ds.feature_names, ds.label_names, {}}, Hyperparameters{}),
                    std::invalid_argument);
  }

  SUBCASE("a huge learning rate diverges") {
    Hyperparameters h;
    h.learning_rate = 1e6;
    h.optimizer = Optimizer::sgd_momentum;
    h.activation = Activation::identity;
    CHECK_THROWS_AS(train(parts.train, parts.validation, h), DivergenceError);
  }
}

TEST_CASE("default training reproduces the FBA map") {
  const auto& ds = itanet_dataset();
  const auto parts = split(ds, 0);
  TrainReport rep;
  auto s = train_and_test(parts, Hyperparameters{}, rep);
  for (double r2 : rep.test_r2) CHECK(r2 >= 0.999);
  CHECK(rep.test_r2.size() == 3);

  fit_domain(s, ds);
  const auto parity =
      parity_check(s, fba::itanet_mini(), {"CADA"}, itanet_sweep_options().labels, {{"CADA", kCadaKcat}}, 100, 3);
  CHECK(parity.worst_relative_error() <= 0.005);

  std::vector<double> zero{0.0};
  const VectorXd v0 = s.predict(zero);
  CHECK(v0(0) == doctest::Approx(0.277).epsilon(0.01));
  CHECK(std::abs(v0(2)) <= 0.02);
  std::vector<double> full{3.476 / kCadaKcat};
  const VectorXd v1 = s.predict(full);
  CHECK(v1(2) == doctest::Approx(3.476).epsilon(0.01));
  CHECK(v1(0) >= 0.0);
  CHECK(v1(0) <= 0.003);
  std::vector<double> beyond{1e-4};
  CHECK(s.predict(beyond) == v1);
}

TEST_CASE("hyperparameter search ranks cells by test error") {
  const auto parts = split(itanet_dataset(), 0);
  Hyperparameters a;
  a.max_epochs = 200;
  Hyperparameters b = a;
  b.activation = Activation::tanh;
  b.neurons = 8;
  const auto cells = hyperparameter_search(parts, {a, a, b});
  REQUIRE(cells.size() == 3);
  for (const auto& c : cells) REQUIRE(c.report.has_value());
  for (std::size_t i = 1; i < cells.size(); ++i) CHECK(cells[i - 1].report->test_mse <= cells[i].report->test_mse);
  int identical = 0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j)
      if (cells[i].hyper.neurons == 3 && cells[j].hyper.neurons == 3) {
        CHECK(cells[i].report->test_mse == cells[j].report->test_mse);
        CHECK(cells[i].report->validation_history == cells[j].report->validation_history);
        ++identical;
      }
  CHECK(identical == 1);

  CHECK(hyperparameter_search(parts, {a}).size() == 1);
  CHECK_THROWS_AS(hyperparameter_search(parts, {}), std::invalid_argument);
  CHECK(default_hyper_grid(0).size() == 36);

  Hyperparameters bad = a;
  bad.learning_rate = 1e6;
  bad.optimizer = Optimizer::sgd_momentum;
  bad.activation = Activation::identity;
  const auto mixed = hyperparameter_search(parts, {bad, a});
  CHECK(mixed[0].report.has_value());
  CHECK_FALSE(mixed[1].report.has_value());
  CHECK_FALSE(mixed[1].error.empty());
}
