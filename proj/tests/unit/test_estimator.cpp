#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cybergen/estimation/estimator.hpp"
#include "itanet_exact.hpp"

using namespace cybergen;
using namespace cybergen::estimation;
using Eigen::VectorXd;
using model::HybridModel;

namespace {

model::HybridModelSpec spec(double h_scale = 1.0) {
  model::HybridModelSpec s;
  s.surrogate = testing::itanet_exact();
  s.h_scale = h_scale;
  return s;
}

// Induction from hour 3 on a 10 h batch, sampled hourly.
struct Batch {
  std::vector<VectorXd> states;
  std::vector<double> inputs;
};

Batch plant_run(const HybridModel& m, const VectorXd& x0, int samples = 10) {
  Batch b;
  VectorXd x = x0;
  for (int k = 0; k < samples; ++k) {
    b.states.push_back(x);
    b.inputs.push_back(k < 3 ? 0.0 : 5.0);
    m.advance(x, k, k + 1, std::vector<double>{b.inputs.back()});
  }
  return b;
}

EstimationProblem with_records(const EstimationProblem& base, const Batch& b, const NoiseSpec& noise, int count) {
  EstimationProblem prob = base;
  for (int k = 0; k < count; ++k)
    advance_window(prob, measure(b.states[k], k, VectorXd::Constant(1, b.inputs[k]), noise, k));
  return prob;
}

}  // namespace

TEST_CASE("measurement noise") {
  VectorXd x(5);
  x << 100.0, 100.0, 100.0, 100.0, 3e-5;
  const VectorXd u = VectorXd::Constant(1, 2.0);

  const auto exact = measure(x, 1.0, u, {0.0, 7}, 3);
  CHECK(exact.y == x.head(4));
  CHECK(exact.t == 1.0);
  CHECK(exact.u == u);

  const auto a = measure(x, 1.0, u, {0.015, 7}, 3);
  const auto b = measure(x, 1.0, u, {0.015, 7}, 3);
  CHECK(a.y == b.y);
  CHECK(a.y != measure(x, 1.0, u, {0.015, 7}, 4).y);
  CHECK(a.y != measure(x, 1.0, u, {0.015, 8}, 3).y);

  double sum = 0.0, sq = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const double v = measure(x, 0.0, u, {0.015, 11}, static_cast<std::uint64_t>(i)).y[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  CHECK(sd >= 1.4);
  CHECK(sd <= 1.6);

  for (int i = 0; i < 200; ++i) CHECK(measure(x, 0.0, u, {5.0, 1}, static_cast<std::uint64_t>(i)).y.minCoeff() >= 0.0);
  CHECK_THROWS_AS(measure(x, 0.0, u, {-0.1, 1}, 0), std::invalid_argument);
}

TEST_CASE("window bookkeeping") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 5);

  SUBCASE("full information keeps every record and the t0 prior") {
    auto prob = with_records(EstimationProblem::full_information(spec(), x0), batch, {}, 5);
    CHECK(prob.records.size() == 5);
    CHECK(prob.prior == x0);
  }
  SUBCASE("a finite window drops the oldest record and hands over the prior") {
    auto prob = EstimationProblem::full_information(spec(), x0);
    prob.window = 3;
    prob = with_records(prob, batch, {}, 3);
    const auto est = estimate(prob);
    accept(prob, est);
    advance_window(prob, measure(batch.states[3], 3.0, VectorXd::Constant(1, 5.0), {}, 3));
    CHECK(prob.records.size() == 3);
    CHECK(prob.records.front().t == 1.0);
    CHECK(prob.prior == est.smoothed[1]);
  }
  SUBCASE("without an estimate the prior is carried forward") {
    auto prob = EstimationProblem::full_information(spec(), x0);
    prob.window = 2;
    prob = with_records(prob, batch, {}, 3);
    CHECK(prob.records.size() == 2);
    CHECK(prob.prior.isApprox(batch.states[1], 1e-12));
  }
  SUBCASE("timestamps must increase") {
    auto prob = with_records(EstimationProblem::full_information(spec(), x0), batch, {}, 2);
    CHECK_THROWS_AS(advance_window(prob, measure(batch.states[1], 1.0, VectorXd::Zero(1), {}, 1)), EstimationError);
    prob.records[1].t = 0.0;
    CHECK_THROWS_AS(estimate(prob), EstimationError);
  }
}

TEST_CASE("problem validation") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  auto prob = EstimationProblem::full_information(spec(), x0);
  CHECK(prob.P.size() == 5);
  CHECK(prob.R.size() == 4);
  CHECK(prob.P.isApprox(VectorXd::Constant(5, 10.0)));
  CHECK(prob.R.isApprox(VectorXd::Constant(4, 1000.0)));
  CHECK_THROWS_AS(estimate(prob), std::invalid_argument);
  auto bad = prob;
  bad.P[2] = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = prob;
  bad.R.resize(5);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = prob;
  bad.Q = VectorXd::Ones(3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("exact model and noise-free data recover the enzyme") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0);

  SUBCASE("true prior is a fixed point") {
    auto prob = with_records(EstimationProblem::full_information(spec(), x0), batch, {}, 10);
    const auto terms = estimation_objective(prob, x0);
    CHECK(terms.total() == doctest::Approx(0.0).scale(1e-20));
    const auto est = estimate(prob);
    for (int k = 0; k < 10; ++k) CHECK(std::abs(est.smoothed[k][4] - batch.states[k][4]) <= 1e-6);
    CHECK((est.state - batch.states[9]).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
  SUBCASE("a wrong enzyme prior is corrected by the data") {
    VectorXd x_true = x0;
    x_true[4] = 2e-5;  // pre-induced culture
    const auto truth = plant_run(m, x_true);
    auto prob = with_records(EstimationProblem::full_information(spec(), x0), truth, {}, 10);
    const auto est = estimate(prob);
    const double e_ss = model::steady_state_enzyme(5.0, m.spec().params);
    for (int k = 0; k < 10; ++k) CHECK(std::abs(est.smoothed[k][4] - truth.states[k][4]) <= 0.01 * e_ss);
    CHECK(est.state.minCoeff() >= 0.0);
  }
}

TEST_CASE("a dominant arrival cost pins the estimate to the prior") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 1);
  auto prob = EstimationProblem::full_information(spec(), x0, 1e12, 1.0);
  prob.prior[0] = 29.0;  // prior disagrees with the measurement
  prob = with_records(prob, batch, {}, 1);
  const auto est = estimate(prob);
  CHECK(est.state[0] == doctest::Approx(29.0).epsilon(1e-9));
  CHECK(est.smoothed.size() == 1);
}

TEST_CASE("window-start enzyme stays below the induced plateau") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 2);
  auto prob = EstimationProblem::full_information(spec(), x0, 1e12, 1.0);
  prob.prior[4] = 1e-3;  // far above anything expression can reach
  prob = with_records(prob, batch, {}, 2);
  const auto& p = m.spec().params;
  const double cap = (p.theta1 + p.theta2) / p.theta5;
  const auto est = estimate(prob);
  CHECK(est.window_start[4] <= cap * (1 + 1e-12));
  CHECK(est.window_start[4] == doctest::Approx(cap).epsilon(1e-9));
}

TEST_CASE("objective decomposition") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 6);
  auto prob = with_records(EstimationProblem::full_information(spec(), x0), batch, {0.015, 5}, 6);
  prob.Q = VectorXd::Constant(5, 50.0);
  VectorXd xs = x0;
  xs[1] = 0.3;
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(5, 5, 1e-3);
  std::vector<VectorXd> smoothed;
  const auto terms = estimation_objective(prob, xs, w, &smoothed);

  // independent recomputation
  const double arrival = 10.0 * (xs - x0).squaredNorm();
  double meas = 0.0, noise = 0.0;
  VectorXd x = xs;
  model::Rk4Stepper stepper(5);
  for (int k = 0; k < 6; ++k) {
    if (k > 0) {
      stepper.advance(m.system(std::vector<double>{prob.records[k - 1].u[0]}), k - 1, k, x,
                      model::HybridModel::default_options());
      x = (x + w.col(k - 1)).cwiseMax(0.0);
      noise += 50.0 * w.col(k - 1).squaredNorm();
    }
    CHECK(smoothed[static_cast<std::size_t>(k)].isApprox(x, 1e-12));
    meas += 1000.0 * (prob.records[k].y - x.head(4)).squaredNorm();
  }
  CHECK(terms.arrival == doctest::Approx(arrival).epsilon(1e-9));
  CHECK(terms.measurement == doctest::Approx(meas).epsilon(1e-9));
  CHECK(terms.noise == doctest::Approx(noise).epsilon(1e-9));
  CHECK(terms.total() == doctest::Approx(arrival + meas + noise).epsilon(1e-9));

  const auto est = estimate(prob);
  CHECK(est.w.cols() == 5);
  CHECK(est.terms.total() <= terms.total());
  CHECK(est.terms.total() == doctest::Approx(estimation_objective(prob, est.window_start, est.w).total()).epsilon(1e-9));
}

TEST_CASE("common weight scaling leaves the estimate unchanged") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 8);
  auto a = with_records(EstimationProblem::full_information(spec(), x0), batch, {0.015, 3}, 8);
  auto b = a;
  b.P *= 7.0;
  b.R *= 7.0;
  const auto ea = estimate(a), eb = estimate(b);
  const VectorXd scale = (VectorXd(5) << 30.0, 1.0, 1.0, 1.0, 5e-5).finished();
  CHECK((ea.state - eb.state).cwiseQuotient(scale).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("the estimator filters noisy measurements") {
  const HybridModel m(spec());
  const VectorXd x0 = m.initial_state(30.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(m, x0, 10);
  auto prob = with_records(EstimationProblem::full_information(spec(), x0), batch, {0.015, 21}, 10);
  const auto est = estimate(prob);
  double raw = 0.0, filtered = 0.0;
  for (int k = 0; k < 10; ++k) {
    const VectorXd truth = batch.states[k].head(4);
    raw += (prob.records[k].y - truth).cwiseAbs().sum();
    filtered += (est.smoothed[k].head(4) - truth).cwiseAbs().sum();
  }
  CHECK(filtered <= raw);
}

TEST_CASE("mismatched model with noise still tracks the enzyme") {
  const HybridModel plant(spec());
  const VectorXd x0 = plant.initial_state(60.0, 0.0, 0.0, 0.05);
  const auto batch = plant_run(plant, x0, 12);
  auto prob = EstimationProblem::full_information(spec(1.04), x0);
  const double e_ss = model::steady_state_enzyme(5.0, plant.spec().params);
  double sum = 0.0;
  int count = 0;
  for (int k = 0; k < 12; ++k) {
    advance_window(prob, measure(batch.states[k], k, VectorXd::Constant(1, batch.inputs[k]), {0.015, 9}, k));
    const auto est = estimate(prob);
    accept(prob, est);
    if (k >= 3) {
      sum += std::pow(est.state[4] - batch.states[k][4], 2);
      ++count;
    }
  }
  CHECK(std::sqrt(sum / count) <= 0.05 * e_ss);
}

TEST_CASE("estimate CSV") {
  const HybridModel m(spec());
  const auto path = std::filesystem::temp_directory_path() / "cybergen_est.csv";
  write_estimates_csv({0.0, 1.0}, {m.initial_state(1, 2, 3, 4, 5e-5), m.initial_state(1, 2, 3, 4, 6e-5)}, m, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,e_cadA_est,z_glc_est,z_ita_est,z_ace_est,b_est");
  std::getline(in, line);
  CHECK(line.rfind("0,5e-05,1,2,3,4", 0) == 0);
  std::filesystem::remove(path);
}
