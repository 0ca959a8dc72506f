#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cybergen::model {

/// Piecewise-constant inputs: interval i holds values.row(i) on
/// [edges[i], edges[i+1]). The last value also holds at the final edge.
struct InputProfile {
  std::vector<double> edges;  // h, strictly increasing
  Eigen::MatrixXd values;     // n_intervals x channels, W/m^2

  static InputProfile uniform(double t0, double tf, std::size_t n_intervals, std::size_t channels, double value);

  std::size_t intervals() const { return edges.empty() ? 0 : edges.size() - 1; }
  std::size_t channels() const { return static_cast<std::size_t>(values.cols()); }
  /// Interval containing t (clamped to the first/last interval).
  std::size_t interval_at(double t) const;
  /// Throws std::invalid_argument when edges and values disagree.
  void validate() const;
};

}  // namespace cybergen::model
