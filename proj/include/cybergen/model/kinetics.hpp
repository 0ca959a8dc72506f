#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace cybergen::model {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Transcription/translation kinetics used by the eukaryotic model.
/// theta2_p defaults to theta2 * d_p / k_tl, which gives the same enzyme
/// plateau as the lumped prokaryotic expression law.
struct EukaryoteParams {
  double theta1_p = 0.0;                 // basal transcription, mmol/g_b/h
  std::optional<double> theta2_p;        // max transcription rate, mmol/g_b/h
  std::optional<double> theta3_p;        // Hill exponent, defaults to theta3
  std::optional<double> theta4_p;        // half-saturation input, defaults to theta4
  double k_tl = 1.0;                     // translation rate constant, 1/h
  double d_p = 8.3178;                   // mRNA degradation, 1/h (5 min half-life)
};

struct KineticParams {
  double theta1 = 0.0;        // basal expression, mmol/g_b/h
  double theta2 = 3.674e-5;   // max expression rate, mmol/g_b/h
  double theta3 = 2.0780;     // Hill exponent
  double theta4 = 0.3799;     // half-saturation light intensity, W/m^2
  double theta5 = 0.6931;     // enzyme degradation, 1/h
  double theta6 = 2.964e-4;   // glucose affinity, mmol/L
  double theta7 = 134.63;     // acetate inhibition constant, mmol/L
  std::map<std::string, double> k_cat{{"CADA", 66240.0}};  // 1/h
  double v_glc = 3.48;        // glucose uptake magnitude, mmol/g_b/h
  EukaryoteParams eukaryote;

  /// Throws ParameterError when a value is negative or a strictly positive
  /// constant is zero.
  void validate() const;

  double transcription_max() const;
  double transcription_exponent() const { return eukaryote.theta3_p.value_or(theta3); }
  double transcription_half_input() const { return eukaryote.theta4_p.value_or(theta4); }
};

/// theta1 + theta2 u^theta3 / (theta4^theta3 + u^theta3). Throws for u < 0.
double hill_activation(double u, const KineticParams& p);

/// Same law with the transcription constants of the eukaryotic model.
double transcription_rate(double u, const KineticParams& p);

/// Monod glucose limitation times hyperbolic acetate inhibition.
double limitation_h(double z_glc, double z_ace, const KineticParams& p);

/// Plateau q_e(u) / d_e of the enzyme when growth has stopped.
double steady_state_enzyme(double u, const KineticParams& p);

}  // namespace cybergen::model
