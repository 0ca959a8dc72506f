#include "cybergen/estimation/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace cybergen::estimation {

using model::HybridModel;

MeasurementRecord measure(const Eigen::VectorXd& plant_state, double t, const Eigen::VectorXd& u,
                          const NoiseSpec& noise, std::uint64_t sample_index) {
  if (!(noise.std_fraction >= 0.0)) throw std::invalid_argument("noise std fraction must be >= 0");
  if (plant_state.size() < kMeasured) throw std::invalid_argument("state too short to measure");
  MeasurementRecord r;
  r.t = t;
  r.u = u;
  r.y = plant_state.head(kMeasured);
  if (noise.std_fraction > 0.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(sample_index), static_cast<std::uint32_t>(sample_index >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < kMeasured; ++i) r.y[i] = std::max(0.0, r.y[i] * (1.0 + noise.std_fraction * g(rng)));
  }
  return r;
}

EstimationProblem EstimationProblem::full_information(model::HybridModelSpec model, Eigen::VectorXd prior, double p,
                                                      double r) {
  EstimationProblem prob;
  prob.model = std::move(model);
  prob.P = Eigen::VectorXd::Constant(prior.size(), p);
  prob.R = Eigen::VectorXd::Constant(kMeasured, r);
  prob.prior = std::move(prior);
  return prob;
}

void EstimationProblem::validate() const {
  const HybridModel m(model);
  const Eigen::Index n = m.state_size();
  if (window < 1) throw std::invalid_argument("estimation window must be >= 1");
  if (prior.size() != n) throw std::invalid_argument("prior has the wrong size");
  if (P.size() != n) throw std::invalid_argument("P must have one weight per state");
  if (R.size() != kMeasured) throw std::invalid_argument("R must have one weight per measured output");
  if (Q.size() != 0 && Q.size() != n) throw std::invalid_argument("Q must have one weight per state");
  if (P.minCoeff() < 0.0 || R.minCoeff() < 0.0 || (Q.size() && Q.minCoeff() < 0.0))
    throw std::invalid_argument("weights must be non-negative");
  if (scale.size() != 0 && (scale.size() != n || !(scale.minCoeff() > 0.0)))
    throw std::invalid_argument("scale must be positive with one entry per state");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].y.size() != kMeasured) throw std::invalid_argument("measurement has the wrong size");
    if (records[i].u.size() != m.enzymes()) throw std::invalid_argument("recorded input has the wrong size");
    if (i > 0 && !(records[i].t > records[i - 1].t))
      throw EstimationError("measurement timestamps must be strictly increasing");
  }
}

namespace {

Eigen::VectorXd default_scale(const EstimationProblem& prob, const HybridModel& m) {
  if (prob.scale.size()) return prob.scale;
  const auto& p = prob.model.params;
  Eigen::VectorXd s(m.state_size());
  for (Eigen::Index i = 0; i < kMeasured; ++i) s[i] = std::max(std::abs(prob.prior[i]), 1.0);
  const double plateau = p.theta5 > 0.0 ? (p.theta1 + p.theta2) / p.theta5 : p.theta1 + p.theta2;
  for (Eigen::Index j = 0; j < m.enzymes(); ++j) {
    s[HybridModel::kEnzyme + j] = std::max({std::abs(prob.prior[HybridModel::kEnzyme + j]), plateau, 1e-12});
    if (m.eukaryote()) {
      const double mrna = p.eukaryote.d_p > 0.0 ? (p.eukaryote.theta1_p + p.transcription_max()) / p.eukaryote.d_p
                                                : p.transcription_max();
      s[m.mrna_offset() + j] = std::max({std::abs(prob.prior[m.mrna_offset() + j]), mrna, 1e-12});
    }
  }
  return s;
}

double weighted(const Eigen::VectorXd& r, const Eigen::VectorXd& w) { return (r.array().square() * w.array()).sum(); }

ObjectiveTerms objective_with(const HybridModel& m, const EstimationProblem& prob, const Eigen::VectorXd& x_start,
                              const Eigen::MatrixXd& w, std::vector<Eigen::VectorXd>* smoothed,
                              model::Rk4Stepper& stepper) {
  ObjectiveTerms terms;
  terms.arrival = weighted(x_start - prob.prior, prob.P);
  Eigen::VectorXd x = x_start;
  const auto n = prob.records.size();
  if (smoothed) smoothed->assign(1, x);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const auto& rec = prob.records[i - 1];
      stepper.advance(m.system(std::span<const double>(rec.u.data(), static_cast<std::size_t>(rec.u.size()))), rec.t,
                      prob.records[i].t, x, prob.integrator);
      if (w.size()) {
        x = (x + w.col(static_cast<Eigen::Index>(i - 1))).cwiseMax(0.0);
        terms.noise += weighted(w.col(static_cast<Eigen::Index>(i - 1)), prob.Q);
      }
      if (smoothed) smoothed->push_back(x);
    }
    terms.measurement += weighted(prob.records[i].y - x.head(kMeasured), prob.R);
  }
  return terms;
}

}  // namespace

ObjectiveTerms estimation_objective(const EstimationProblem& prob, const Eigen::VectorXd& x_start,
                                    const Eigen::MatrixXd& w, std::vector<Eigen::VectorXd>* smoothed) {
  prob.validate();
  if (prob.records.empty()) throw std::invalid_argument("estimation needs at least one record");
  const HybridModel m(prob.model);
  if (x_start.size() != m.state_size()) throw std::invalid_argument("window-start state has the wrong size");
  if (w.size() && (w.rows() != m.state_size() || w.cols() != static_cast<Eigen::Index>(prob.records.size() - 1)))
    throw std::invalid_argument("noise sequence has the wrong shape");
  if (w.size() && prob.Q.size() == 0) throw std::invalid_argument("noise sequence given without Q");
  model::Rk4Stepper stepper(m.state_size());
  return objective_with(m, prob, x_start, w, smoothed, stepper);
}

Estimate estimate(const EstimationProblem& prob) {
  prob.validate();
  if (prob.records.empty()) throw std::invalid_argument("estimation needs at least one record");
  const HybridModel m(prob.model);
  const Eigen::Index n_x = m.state_size();
  const Eigen::Index transitions = static_cast<Eigen::Index>(prob.records.size() - 1);
  const bool with_noise = prob.Q.size() != 0 && transitions > 0;
  const Eigen::Index n_w = with_noise ? n_x * transitions : 0;
  const Eigen::VectorXd s = default_scale(prob, m);

  Eigen::VectorXd lo(n_x + n_w), hi(n_x + n_w);
  lo.head(n_x).setZero();
  hi.setConstant(std::numeric_limits<double>::infinity());
  lo.tail(n_w).setConstant(-std::numeric_limits<double>::infinity());
  // expression cannot push enzyme (or mRNA) above its induced plateau
  const auto& kp = prob.model.params;
  for (Eigen::Index j = 0; j < m.enzymes(); ++j) {
    if (kp.theta5 > 0.0) hi[HybridModel::kEnzyme + j] = (kp.theta1 + kp.theta2) / kp.theta5 / s[HybridModel::kEnzyme + j];
    if (m.eukaryote() && kp.eukaryote.d_p > 0.0)
      hi[m.mrna_offset() + j] =
          (kp.eukaryote.theta1_p + kp.transcription_max()) / kp.eukaryote.d_p / s[m.mrna_offset() + j];
  }

  auto unpack = [&](const Eigen::VectorXd& v, Eigen::VectorXd& x, Eigen::MatrixXd& w) {
    x = v.head(n_x).cwiseProduct(s);
    if (with_noise) {
      w = Eigen::Map<const Eigen::MatrixXd>(v.data() + n_x, n_x, transitions);
      w = w.array().colwise() * s.array();
    } else {
      w.resize(0, 0);
    }
  };

  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(n_x + n_w);
  const Eigen::VectorXd& start = prob.warm_start.size() == n_x ? prob.warm_start : prob.prior;
  v0.head(n_x) = start.cwiseMax(0.0).cwiseQuotient(s).cwiseMin(hi.head(n_x));

  model::Rk4Stepper stepper(n_x);
  Eigen::VectorXd x;
  Eigen::MatrixXd w;
  const control::Objective f = [&](const Eigen::VectorXd& v) {
    unpack(v, x, w);
    try {
      return objective_with(m, prob, x, w, nullptr, stepper).total();
    } catch (const model::IntegrationError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  control::BoxBfgsResult res;
  try {
    res = control::minimize_box(f, v0, lo, hi, prob.solver);
  } catch (const std::exception& e) {
    throw EstimationError(std::string("estimator failed: ") + e.what());
  }
  if (!std::isfinite(res.f)) throw EstimationError("estimator objective is not finite");

  Estimate est;
  unpack(res.x, x, w);
  est.window_start = x;
  est.w = w;
  est.terms = objective_with(m, prob, x, w, &est.smoothed, stepper);
  est.state = est.smoothed.back();
  for (const auto& r : prob.records) est.t.push_back(r.t);
  est.iterations = res.iterations;
  est.status = res.status;
  return est;
}

void advance_window(EstimationProblem& prob, MeasurementRecord record) {
  if (!prob.records.empty() && !(record.t > prob.records.back().t))
    throw EstimationError("measurement at t=" + std::to_string(record.t) + " does not follow t=" +
                          std::to_string(prob.records.back().t));
  prob.records.push_back(std::move(record));
  while (prob.records.size() > prob.window) {
    const MeasurementRecord dropped = prob.records.front();
    prob.records.erase(prob.records.begin());
    if (prob.smoothed.size() >= 2) {
      prob.smoothed.erase(prob.smoothed.begin());
      prob.prior = prob.smoothed.front();
    } else {
      // no smoothed state at the new window start: carry the prior forward
      const HybridModel m(prob.model);
      m.advance(prob.prior, dropped.t, prob.records.front().t,
                std::span<const double>(dropped.u.data(), static_cast<std::size_t>(dropped.u.size())),
                prob.integrator);
      prob.smoothed.clear();
    }
    prob.warm_start = prob.prior;
  }
}

void accept(EstimationProblem& prob, const Estimate& est) {
  prob.smoothed = est.smoothed;
  prob.warm_start = est.window_start;
}

void write_estimates_csv(const std::vector<double>& t, const std::vector<Eigen::VectorXd>& estimates,
                         const model::HybridModel& m, const std::filesystem::path& path) {
  if (t.size() != estimates.size()) throw std::invalid_argument("times and estimates differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  const auto& names = m.spec().enzyme_names;
  out << "t";
  for (const auto& n : names) out << ",e_" << n << "_est";
  out << ",z_glc_est,z_ita_est,z_ace_est,b_est";
  if (m.eukaryote())
    for (const auto& n : names) out << ",p_" << n << "_est";
  out << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& x = estimates[k];
    out << t[k];
    for (Eigen::Index j = 0; j < m.enzymes(); ++j) out << ',' << x[HybridModel::kEnzyme + j];
    for (Eigen::Index i = 0; i < kMeasured; ++i) out << ',' << x[i];
    if (m.eukaryote())
      for (Eigen::Index j = 0; j < m.enzymes(); ++j) out << ',' << x[m.mrna_offset() + j];
    out << '\n';
  }
}

}  // namespace cybergen::estimation
