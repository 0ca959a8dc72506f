#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cybergen/model/input_profile.hpp"
#include "cybergen/model/integrator.hpp"
#include "cybergen/model/kinetics.hpp"
#include "cybergen/surrogate/exchange_surrogate.hpp"

namespace cybergen::model {

enum class CellType { prokaryote, eukaryote };

std::string to_string(CellType c);
CellType cell_type_from_string(const std::string& s);

struct HybridModelSpec {
  KineticParams params;
  CellType cell = CellType::prokaryote;
  /// Multiplies the limitation factor h; 1.04 gives the mismatched plant.
  double h_scale = 1.0;
  std::shared_ptr<const surrogate::ExchangeSurrogate> surrogate;
  std::vector<std::string> enzyme_names{"cadA"};
};

struct RateSnapshot {
  Eigen::VectorXd v_ext;  // surrogate fluxes, label order
  double h = 0.0;
  Eigen::Vector3d q_z;    // glc, ita, ace
  double mu = 0.0;        // 1/h
  Eigen::VectorXd q_e;    // expression (prokaryote) or translation (eukaryote)
  double d_e = 0.0;
  Eigen::VectorXd q_p;    // eukaryote only
  double d_p = 0.0;
};

/// State layout: [z_glc, z_ita, z_ace, b, e_1..e_n, p_1..p_n], the p block
/// only for eukaryotes. Units mmol/L, g_b/L and mmol/g_b.
class HybridModel {
 public:
  static constexpr Eigen::Index kGlc = 0, kIta = 1, kAce = 2, kBio = 3, kEnzyme = 4;

  explicit HybridModel(HybridModelSpec spec);

  const HybridModelSpec& spec() const { return spec_; }
  Eigen::Index enzymes() const { return n_e_; }
  Eigen::Index state_size() const { return kEnzyme + n_e_ * (eukaryote() ? 2 : 1); }
  Eigen::Index mrna_offset() const { return kEnzyme + n_e_; }
  bool eukaryote() const { return spec_.cell == CellType::eukaryote; }

  Eigen::VectorXd initial_state(double glc, double ita, double ace, double b, double e = 0.0) const;

  /// Derivative at state x under inputs u (one per enzyme). Allocation free.
  void rhs(const Eigen::VectorXd& x, std::span<const double> u, Eigen::VectorXd& dx) const;
  RateSnapshot rates(const Eigen::VectorXd& x, std::span<const double> u) const;

  /// Upper bound on the local decay rate of the linearized system (1/h).
  double stability_rate(const Eigen::VectorXd& x) const;

  OdeSystem system(std::span<const double> u) const;

  /// Integrates x over [t0, t1] under constant inputs u.
  void advance(Eigen::VectorXd& x, double t0, double t1, std::span<const double> u,
               const IntegratorOptions& opts = default_options()) const;

  struct Result {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;  // input applied on the step that ends at t
  };
  /// Full trajectory, one sample per integrator step.
  Result simulate(const Eigen::VectorXd& x0, const InputProfile& profile,
                  const IntegratorOptions& opts = default_options()) const;
  /// End state only.
  Eigen::VectorXd final_state(const Eigen::VectorXd& x0, const InputProfile& profile,
                              const IntegratorOptions& opts = default_options()) const;

  std::vector<std::string> csv_header() const;
  void write_csv(const Result& r, const std::filesystem::path& path) const;

  static IntegratorOptions default_options();

 private:
  void check_inputs(std::span<const double> u) const;

  HybridModelSpec spec_;
  Eigen::Index n_e_ = 1;
  std::size_t i_bio_ = 0, i_ace_ = 0, i_ita_ = 0;
};

}  // namespace cybergen::model
