#include "cybergen/model/kinetics.hpp"

#include <algorithm>

namespace cybergen::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

double hill(double u, double basal, double vmax, double n, double k) {
  if (!(u >= 0.0)) throw std::invalid_argument("light input must be >= 0, got " + std::to_string(u));
  if (u == 0.0) return basal;
  const double un = std::pow(u, n);
  return basal + vmax * un / (std::pow(k, n) + un);
}

}  // namespace

void KineticParams::validate() const {
  require(theta1 >= 0.0 && theta2 >= 0.0 && theta3 >= 0.0, "theta1..theta3 must be >= 0");
  require(theta4 > 0.0, "theta4 must be > 0");
  require(theta5 >= 0.0, "theta5 must be >= 0");
  require(theta6 > 0.0, "theta6 must be > 0");
  require(theta7 > 0.0, "theta7 must be > 0");
  require(v_glc >= 0.0, "v_glc must be >= 0");
  for (const auto& [id, k] : k_cat) require(k > 0.0, "k_cat of " + id + " must be > 0");
  const auto& e = eukaryote;
  require(e.theta1_p >= 0.0 && transcription_max() >= 0.0 && transcription_exponent() >= 0.0,
          "transcription constants must be >= 0");
  require(transcription_half_input() > 0.0, "theta4_p must be > 0");
  require(e.k_tl > 0.0, "k_tl must be > 0");
  require(e.d_p >= 0.0, "d_p must be >= 0");
}

double KineticParams::transcription_max() const {
  if (eukaryote.theta2_p) return *eukaryote.theta2_p;
  return theta2 * eukaryote.d_p / eukaryote.k_tl;
}

double hill_activation(double u, const KineticParams& p) { return hill(u, p.theta1, p.theta2, p.theta3, p.theta4); }

double transcription_rate(double u, const KineticParams& p) {
  return hill(u, p.eukaryote.theta1_p, p.transcription_max(), p.transcription_exponent(),
              p.transcription_half_input());
}

double limitation_h(double z_glc, double z_ace, const KineticParams& p) {
  const double glc = std::max(z_glc, 0.0);
  const double ace = std::max(z_ace, 0.0);
  return (glc / (p.theta6 + glc)) * (p.theta7 / (p.theta7 + ace));
}

double steady_state_enzyme(double u, const KineticParams& p) {
  if (!(p.theta5 > 0.0)) throw ParameterError("steady-state enzyme needs a positive degradation rate");
  return hill_activation(u, p) / p.theta5;
}

}  // namespace cybergen::model
