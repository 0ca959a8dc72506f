#include "cybergen/model/input_profile.hpp"

#include <algorithm>
#include <stdexcept>

namespace cybergen::model {

InputProfile InputProfile::uniform(double t0, double tf, std::size_t n_intervals, std::size_t channels, double value) {
  if (!(tf > t0) || n_intervals == 0) throw std::invalid_argument("input profile needs tf > t0 and intervals >= 1");
  InputProfile p;
  p.edges.resize(n_intervals + 1);
  const double width = (tf - t0) / static_cast<double>(n_intervals);
  for (std::size_t i = 0; i <= n_intervals; ++i) p.edges[i] = t0 + width * static_cast<double>(i);
  p.edges.back() = tf;
  p.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_intervals), static_cast<Eigen::Index>(channels), value);
  return p;
}

std::size_t InputProfile::interval_at(double t) const {
  const auto it = std::upper_bound(edges.begin(), edges.end(), t);
  if (it == edges.begin()) return 0;
  return std::min(static_cast<std::size_t>(it - edges.begin()) - 1, intervals() - 1);
}

void InputProfile::validate() const {
  if (edges.size() < 2) throw std::invalid_argument("input profile needs at least one interval");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("input profile edges must be strictly increasing");
  if (static_cast<std::size_t>(values.rows()) != intervals() || values.cols() < 1)
    throw std::invalid_argument("input profile has one row of values per interval");
  if (!values.allFinite()) throw std::invalid_argument("input profile values must be finite");
}

}  // namespace cybergen::model
