#include "cybergen/control/mpc.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace cybergen::control {

using model::HybridModel;

std::string to_string(Feedback f) {
  switch (f) {
    case Feedback::plant_state: return "plant_state";
    case Feedback::measured_and_estimated: return "measured_and_estimated";
    case Feedback::estimate: return "estimate";
  }
  return "?";
}

Feedback feedback_from_string(const std::string& s) {
  if (s == "plant_state") return Feedback::plant_state;
  if (s == "measured_and_estimated") return Feedback::measured_and_estimated;
  if (s == "estimate") return Feedback::estimate;
  throw std::invalid_argument("unknown feedback mode '" + s + "'");
}

namespace {

void append_interval(const HybridModel& plant, const Eigen::VectorXd& u, double a, double b, Eigen::VectorXd& x,
                     const model::IntegratorOptions& opts, ClosedLoopRecord& rec) {
  model::InputProfile p;
  p.edges = {a, b};
  p.values = u.transpose();
  const auto part = plant.simulate(x, p, opts);
  const std::size_t skip = rec.plant.t.empty() ? 0 : 1;
  for (std::size_t i = skip; i < part.t.size(); ++i) {
    rec.plant.t.push_back(part.t[i]);
    rec.plant.x.push_back(part.x[i]);
    rec.plant.u.push_back(part.u[i]);
  }
  x = part.x.back();
}

}  // namespace

ClosedLoopRecord run_mpc(const ControlProblem& problem, const model::HybridModelSpec& plant_spec,
                         const Eigen::VectorXd& x0, const estimation::EstimationProblem* estimator,
                         const MpcOptions& options) {
  problem.validate();
  const HybridModel plant(plant_spec);
  const HybridModel controller(problem.model);
  if (plant.state_size() != controller.state_size() || plant.enzymes() != controller.enzymes())
    throw std::invalid_argument("plant and controller models have different state layouts");
  if (x0.size() != plant.state_size()) throw std::invalid_argument("initial state has the wrong size");
  if (options.feedback != Feedback::plant_state && !estimator)
    throw std::invalid_argument("feedback mode " + to_string(options.feedback) + " needs an estimator");

  std::optional<estimation::EstimationProblem> est;
  if (estimator) {
    est = *estimator;
    est->records.clear();
    est->smoothed.clear();
    est->warm_start.resize(0);
    est->validate();
  }

  const auto edges = problem.edges();
  const auto n = problem.n_intervals;
  const Eigen::Index ch = controller.enzymes();
  ClosedLoopRecord rec;
  rec.applied.resize(static_cast<Eigen::Index>(n), ch);
  Eigen::VectorXd x = x0;
  Eigen::VectorXd plan;  // remaining inputs of the last solve, flattened

  for (std::size_t k = 0; k < n; ++k) {
    ClosedLoopSample s;
    s.index = k;
    s.t = edges[k];
    s.plant_state = x;
    s.fed_back = x;
    try {
      if (est) {
        auto m = estimation::measure(x, s.t, Eigen::VectorXd::Zero(ch), options.noise, k);
        s.measurement = m.y;
        estimation::advance_window(*est, std::move(m));
        const auto e = estimation::estimate(*est);
        estimation::accept(*est, e);
        s.estimate = e.state;
        s.estimator_iterations = e.iterations;
        if (options.feedback == Feedback::estimate) {
          s.fed_back = e.state;
        } else if (options.feedback == Feedback::measured_and_estimated) {
          s.fed_back = e.state;
          s.fed_back.head(estimation::kMeasured) = s.measurement;
        }
      }
      std::vector<Eigen::VectorXd> guesses;
      if (options.warm_start && plan.size() > ch) guesses.push_back(plan.tail(plan.size() - ch));
      const OcpSolution sol = solve_ocp(problem, s.fed_back, k, guesses);
      plan.resize(sol.profile.values.size());
      for (Eigen::Index i = 0; i < sol.profile.values.rows(); ++i)
        for (Eigen::Index j = 0; j < ch; ++j) plan[i * ch + j] = sol.profile.values(i, j);
      s.input = sol.profile.values.row(0).transpose();
      s.predicted_objective = sol.objective;
      s.iterations = sol.iterations;
    } catch (const std::exception& e) {
      throw ClosedLoopError("sample " + std::to_string(k) + ": " + e.what(), k);
    }
    if (est) est->records.back().u = s.input;
    rec.applied.row(static_cast<Eigen::Index>(k)) = s.input.transpose();
    try {
      append_interval(plant, s.input, edges[k], edges[k + 1], x, problem.integrator, rec);
    } catch (const std::exception& e) {
      throw ClosedLoopError("sample " + std::to_string(k) + ": plant simulation failed: " + e.what(), k);
    }
    rec.samples.push_back(std::move(s));
  }
  rec.final_state = x;
  return rec;
}

ClosedLoopRecord run_open_loop(const ControlProblem& problem, const model::HybridModelSpec& plant_spec,
                               const Eigen::VectorXd& x0) {
  const HybridModel plant(plant_spec);
  const OcpSolution sol = solve_ocp(problem, x0);
  const auto edges = problem.edges();
  ClosedLoopRecord rec;
  rec.applied = sol.profile.values;
  Eigen::VectorXd x = x0;
  for (std::size_t k = 0; k < problem.n_intervals; ++k) {
    ClosedLoopSample s;
    s.index = k;
    s.t = edges[k];
    s.plant_state = x;
    s.input = sol.profile.values.row(static_cast<Eigen::Index>(k)).transpose();
    s.predicted_objective = sol.objective;
    s.iterations = k == 0 ? sol.iterations : 0;
    append_interval(plant, s.input, edges[k], edges[k + 1], x, problem.integrator, rec);
    rec.samples.push_back(std::move(s));
  }
  rec.final_state = x;
  return rec;
}

double estimator_rmse(const ClosedLoopRecord& r, std::size_t skip, Eigen::Index enzyme) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : r.samples) {
    if (s.index < skip || s.estimate.size() == 0) continue;
    const double d = s.estimate[HybridModel::kEnzyme + enzyme] - s.plant_state[HybridModel::kEnzyme + enzyme];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("no estimates to score");
  return std::sqrt(sum / static_cast<double>(count));
}

MetricsSummary summarize(const ClosedLoopRecord& r, double u_min, double u_max, const ClosedLoopRecord* baseline) {
  if (r.samples.empty()) throw std::invalid_argument("empty closed-loop record");
  MetricsSummary m;
  m.final_titer = r.final_state[HybridModel::kIta];
  const double glc0 = r.samples.front().plant_state[HybridModel::kGlc];
  m.glucose_depletion_pct = glc0 > 0.0 ? 100.0 * (glc0 - r.final_state[HybridModel::kGlc]) / glc0 : 0.0;
  m.switch_interval = switch_interval(r.applied.col(0), u_min, u_max);
  if (baseline) {
    const double b = baseline->final_state[HybridModel::kIta];
    if (b > 0.0) m.improvement_vs_baseline_pct = 100.0 * (m.final_titer - b) / b;
  }
  bool has_estimates = false;
  for (const auto& s : r.samples) has_estimates = has_estimates || s.estimate.size() > 0;
  if (has_estimates && r.samples.size() > 3) m.estimator_rmse = estimator_rmse(r);
  return m;
}

std::string metrics_json(const MetricsSummary& m) {
  nlohmann::ordered_json j;
  j["final_titer"] = m.final_titer;
  j["improvement_vs_baseline_pct"] =
      m.improvement_vs_baseline_pct ? nlohmann::ordered_json(*m.improvement_vs_baseline_pct) : nullptr;
  j["glucose_depletion_pct"] = m.glucose_depletion_pct;
  j["switch_interval"] = m.switch_interval;
  if (m.estimator_rmse) j["estimator_rmse"] = *m.estimator_rmse;
  return j.dump(2);
}

void write_samples_csv(const ClosedLoopRecord& r, const model::HybridModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  const auto& names = m.spec().enzyme_names;
  static const char* ext[] = {"z_glc", "z_ita", "z_ace", "b"};
  out << "k,t";
  for (const auto& n : names) out << ",u_" << n;
  for (const auto& n : names) out << ",e_" << n;
  for (const char* e : ext) out << ',' << e;
  if (m.eukaryote())
    for (const auto& n : names) out << ",p_" << n;
  for (const char* e : ext) out << ',' << e << "_meas";
  for (const auto& n : names) out << ",e_" << n << "_est";
  out << ",predicted_objective,iterations\n";
  const Eigen::Index ne = m.enzymes();
  for (const auto& s : r.samples) {
    out << s.index << ',' << s.t;
    for (Eigen::Index j = 0; j < ne; ++j) out << ',' << s.input[j];
    for (Eigen::Index j = 0; j < ne; ++j) out << ',' << s.plant_state[HybridModel::kEnzyme + j];
    for (Eigen::Index i = 0; i < 4; ++i) out << ',' << s.plant_state[i];
    if (m.eukaryote())
      for (Eigen::Index j = 0; j < ne; ++j) out << ',' << s.plant_state[m.mrna_offset() + j];
    for (Eigen::Index i = 0; i < 4; ++i) {
      out << ',';
      if (s.measurement.size()) out << s.measurement[i];
    }
    for (Eigen::Index j = 0; j < ne; ++j) {
      out << ',';
      if (s.estimate.size()) out << s.estimate[HybridModel::kEnzyme + j];
    }
    out << ',' << s.predicted_objective << ',' << s.iterations << '\n';
  }
}

}  // namespace cybergen::control
