#include "cybergen/model/hybrid_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cybergen::model {

namespace {

constexpr std::size_t kMaxLabels = 32;

}  // namespace

std::string to_string(CellType c) { return c == CellType::prokaryote ? "prokaryote" : "eukaryote"; }

CellType cell_type_from_string(const std::string& s) {
  if (s == "prokaryote") return CellType::prokaryote;
  if (s == "eukaryote") return CellType::eukaryote;
  throw std::invalid_argument("unknown cell type '" + s + "' (expected prokaryote or eukaryote)");
}

HybridModel::HybridModel(HybridModelSpec spec) : spec_(std::move(spec)) {
  spec_.params.validate();
  if (!spec_.surrogate) throw std::invalid_argument("hybrid model needs a surrogate");
  if (spec_.enzyme_names.empty()) throw std::invalid_argument("hybrid model needs at least one enzyme");
  if (!(spec_.h_scale >= 0.0) || !std::isfinite(spec_.h_scale)) throw std::invalid_argument("h_scale must be >= 0");
  n_e_ = static_cast<Eigen::Index>(spec_.enzyme_names.size());
  if (spec_.surrogate->input_size() != spec_.enzyme_names.size())
    throw std::invalid_argument("surrogate takes " + std::to_string(spec_.surrogate->input_size()) +
                                " enzymes, model has " + std::to_string(spec_.enzyme_names.size()));
  if (spec_.surrogate->output_size() > kMaxLabels) throw std::invalid_argument("surrogate has too many outputs");
  i_bio_ = spec_.surrogate->label_index("v_bio");
  i_ace_ = spec_.surrogate->label_index("v_ace");
  i_ita_ = spec_.surrogate->label_index("v_ita");
}

IntegratorOptions HybridModel::default_options() {
  IntegratorOptions o;
  o.nonnegative = true;
  return o;
}

Eigen::VectorXd HybridModel::initial_state(double glc, double ita, double ace, double b, double e) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(state_size());
  x[kGlc] = glc;
  x[kIta] = ita;
  x[kAce] = ace;
  x[kBio] = b;
  x.segment(kEnzyme, n_e_).setConstant(e);
  if (eukaryote()) {
    const auto& p = spec_.params;
    // mRNA level that sustains e at the growth-free plateau
    x.segment(mrna_offset(), n_e_).setConstant(e * p.theta5 / p.eukaryote.k_tl);
  }
  return x;
}

void HybridModel::check_inputs(std::span<const double> u) const {
  if (u.size() != static_cast<std::size_t>(n_e_))
    throw std::invalid_argument("expected " + std::to_string(n_e_) + " inputs, got " + std::to_string(u.size()));
}

void HybridModel::rhs(const Eigen::VectorXd& x, std::span<const double> u, Eigen::VectorXd& dx) const {
  check_inputs(u);
  const auto& p = spec_.params;
  std::array<double, kMaxLabels> v{};
  const std::span<double> fluxes(v.data(), spec_.surrogate->output_size());
  spec_.surrogate->evaluate(std::span<const double>(x.data() + kEnzyme, static_cast<std::size_t>(n_e_)), fluxes);

  const double h = spec_.h_scale * limitation_h(x[kGlc], x[kAce], p);
  const double b = x[kBio];
  const double mu = v[i_bio_] * h;
  dx.resize(x.size());
  dx[kGlc] = -b * p.v_glc * h;
  dx[kIta] = b * v[i_ita_] * h;
  dx[kAce] = b * v[i_ace_] * h;
  dx[kBio] = b * mu;
  for (Eigen::Index j = 0; j < n_e_; ++j) {
    const double uj = u[static_cast<std::size_t>(j)];
    const Eigen::Index ie = kEnzyme + j;
    if (eukaryote()) {
      const Eigen::Index ip = mrna_offset() + j;
      dx[ip] = transcription_rate(uj, p) - (mu + p.eukaryote.d_p) * x[ip];
      dx[ie] = p.eukaryote.k_tl * x[ip] - (mu + p.theta5) * x[ie];
    } else {
      dx[ie] = hill_activation(uj, p) - (mu + p.theta5) * x[ie];
    }
  }
}

RateSnapshot HybridModel::rates(const Eigen::VectorXd& x, std::span<const double> u) const {
  check_inputs(u);
  const auto& p = spec_.params;
  RateSnapshot r;
  r.v_ext = Eigen::VectorXd(static_cast<Eigen::Index>(spec_.surrogate->output_size()));
  spec_.surrogate->evaluate(std::span<const double>(x.data() + kEnzyme, static_cast<std::size_t>(n_e_)),
                            std::span<double>(r.v_ext.data(), static_cast<std::size_t>(r.v_ext.size())));
  r.h = spec_.h_scale * limitation_h(x[kGlc], x[kAce], p);
  r.q_z << -p.v_glc * r.h, r.v_ext[static_cast<Eigen::Index>(i_ita_)] * r.h,
      r.v_ext[static_cast<Eigen::Index>(i_ace_)] * r.h;
  r.mu = r.v_ext[static_cast<Eigen::Index>(i_bio_)] * r.h;
  r.d_e = p.theta5;
  r.q_e.resize(n_e_);
  if (eukaryote()) {
    r.q_p.resize(n_e_);
    r.d_p = p.eukaryote.d_p;
    for (Eigen::Index j = 0; j < n_e_; ++j) {
      r.q_p[j] = transcription_rate(u[static_cast<std::size_t>(j)], p);
      r.q_e[j] = p.eukaryote.k_tl * x[mrna_offset() + j];
    }
  } else {
    for (Eigen::Index j = 0; j < n_e_; ++j) r.q_e[j] = hill_activation(u[static_cast<std::size_t>(j)], p);
  }
  return r;
}

double HybridModel::stability_rate(const Eigen::VectorXd& x) const {
  const auto& p = spec_.params;
  const double glc = std::max(x[kGlc], 0.0);
  const double ace = std::max(x[kAce], 0.0);
  const double b = std::max(x[kBio], 0.0);
  const double inhibition = p.theta7 / (p.theta7 + ace);
  // d(dglc/dt)/dglc; vanishes once glucose has underflowed to zero
  double rate = 0.0;
  if (glc > 0.0 || x[kGlc] < 0.0) {
    const double s = p.theta6 + glc;
    rate = b * p.v_glc * spec_.h_scale * inhibition * p.theta6 / (s * s);
  }
  // growth is bounded by the glucose-limited biomass yield
  const double mu_bound = spec_.h_scale * inhibition * p.v_glc;
  rate = std::max(rate, mu_bound + p.theta5);
  if (eukaryote()) rate = std::max(rate, mu_bound + p.eukaryote.d_p);
  return rate;
}

OdeSystem HybridModel::system(std::span<const double> u) const {
  check_inputs(u);
  OdeSystem sys;
  std::vector<double> uu(u.begin(), u.end());
  sys.rhs = [this, uu](double, const Eigen::VectorXd& x, Eigen::VectorXd& dx) { rhs(x, uu, dx); };
  sys.stiffness = [this](const Eigen::VectorXd& x) { return stability_rate(x); };
  return sys;
}

void HybridModel::advance(Eigen::VectorXd& x, double t0, double t1, std::span<const double> u,
                          const IntegratorOptions& opts) const {
  if (x.size() != state_size()) throw std::invalid_argument("state has the wrong size");
  Rk4Stepper stepper(x.size());
  stepper.advance(system(u), t0, t1, x, opts);
}

HybridModel::Result HybridModel::simulate(const Eigen::VectorXd& x0, const InputProfile& profile,
                                          const IntegratorOptions& opts) const {
  profile.validate();
  if (profile.channels() != static_cast<std::size_t>(n_e_)) throw std::invalid_argument("input profile channel count");
  if (x0.size() != state_size()) throw std::invalid_argument("state has the wrong size");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("integrator step must be > 0");
  Result r;
  Rk4Stepper stepper(x0.size());
  Eigen::VectorXd x = x0;
  Eigen::VectorXd u0 = profile.values.row(0).transpose();
  r.t.push_back(profile.edges.front());
  r.x.push_back(x);
  r.u.push_back(u0);
  for (std::size_t k = 0; k < profile.intervals(); ++k) {
    const Eigen::VectorXd u = profile.values.row(static_cast<Eigen::Index>(k)).transpose();
    const OdeSystem sys = system(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
    const double a = profile.edges[k], b = profile.edges[k + 1];
    const long n = std::max(1L, std::lround((b - a) / opts.dt));
    const double h = (b - a) / static_cast<double>(n);
    IntegratorOptions one = opts;
    one.dt = h;
    for (long i = 0; i < n; ++i) {
      const double s0 = a + h * static_cast<double>(i);
      const double s1 = (i + 1 == n) ? b : a + h * static_cast<double>(i + 1);
      stepper.advance(sys, s0, s1, x, one);
      r.t.push_back(s1);
      r.x.push_back(x);
      r.u.push_back(u);
    }
  }
  return r;
}

Eigen::VectorXd HybridModel::final_state(const Eigen::VectorXd& x0, const InputProfile& profile,
                                         const IntegratorOptions& opts) const {
  profile.validate();
  if (profile.channels() != static_cast<std::size_t>(n_e_)) throw std::invalid_argument("input profile channel count");
  if (x0.size() != state_size()) throw std::invalid_argument("state has the wrong size");
  Rk4Stepper stepper(x0.size());
  Eigen::VectorXd x = x0;
  for (std::size_t k = 0; k < profile.intervals(); ++k) {
    const Eigen::VectorXd u = profile.values.row(static_cast<Eigen::Index>(k)).transpose();
    stepper.advance(system(std::span<const double>(u.data(), static_cast<std::size_t>(u.size()))),
                    profile.edges[k], profile.edges[k + 1], x, opts);
  }
  return x;
}

std::vector<std::string> HybridModel::csv_header() const {
  std::vector<std::string> h{"t"};
  const auto& names = spec_.enzyme_names;
  if (names.size() == 1) {
    h.push_back("u");
  } else {
    for (const auto& n : names) h.push_back("u_" + n);
  }
  for (const auto& n : names) h.push_back("e_" + n);
  for (const char* s : {"z_glc", "z_ita", "z_ace", "b"}) h.emplace_back(s);
  if (eukaryote())
    for (const auto& n : names) h.push_back("p_" + n);
  return h;
}

void HybridModel::write_csv(const Result& r, const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    const auto& x = r.x[k];
    out << r.t[k];
    for (Eigen::Index j = 0; j < n_e_; ++j) out << ',' << r.u[k][j];
    for (Eigen::Index j = 0; j < n_e_; ++j) out << ',' << x[kEnzyme + j];
    out << ',' << x[kGlc] << ',' << x[kIta] << ',' << x[kAce] << ',' << x[kBio];
    if (eukaryote())
      for (Eigen::Index j = 0; j < n_e_; ++j) out << ',' << x[mrna_offset() + j];
    out << '\n';
  }
}

}  // namespace cybergen::model
