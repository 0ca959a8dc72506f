#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cybergen/fba/fba.hpp"

namespace cybergen::surrogate {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values explored for one manipulatable flux (mmol/g_b/h).
struct GridAxis {
  std::string reaction_id;
  std::vector<double> values;
};

/// Exploration space: the Cartesian product of the axis value lists.
/// The first axis varies slowest.
struct GridSpec {
  std::vector<GridAxis> axes;

  std::size_t size() const;
  /// Flux tuple of grid point `index`, one entry per axis.
  std::vector<double> point(std::size_t index) const;
  /// Values must be non-negative and strictly increasing within each axis.
  void validate() const;
};

/// `count` evenly spaced values on [first, last], endpoints exact.
std::vector<double> linspace(double first, double last, std::size_t count);

struct LabelSpec {
  std::string name;         // column name, e.g. "v_bio"
  std::string reaction_id;  // exchange reaction supplying the value
};

struct SweepOptions {
  std::map<std::string, double> k_cat;             // manipulatable id -> 1/h
  std::map<std::string, std::string> feature_names;  // manipulatable id -> column name
  std::vector<LabelSpec> labels;                    // empty: every exchange reaction
  fba::SimplexOptions simplex;
  unsigned threads = 0;
};

struct DatasetRow {
  std::vector<double> features;  // enzyme levels, mmol/g_b
  std::vector<double> labels;    // exchange fluxes; empty when infeasible
  bool feasible = false;
};

struct SurrogateDataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<DatasetRow> rows;

  std::size_t feasible_count() const;
  /// Only the feasible rows, in order.
  SurrogateDataset feasible_only() const;
  void validate() const;
};

/// Solves the pinned FBA problem at every grid point, in grid order.
/// Infeasible points are kept and flagged. Throws DatasetError for an empty
/// grid or axes that do not name manipulatable reactions; LP breakdowns
/// propagate as fba::NumericalFailure.
SurrogateDataset sweep(const fba::MetabolicNetwork& net, const GridSpec& grid, const SweepOptions& opts);

/// CSV with one column per feature, then per label, then `feasible` (0/1).
/// Feature columns are recognized on reading by their `e_` prefix.
void write_dataset_csv(const SurrogateDataset& ds, const std::filesystem::path& path);
SurrogateDataset read_dataset_csv(const std::filesystem::path& path);

struct DataSplit {
  SurrogateDataset train;
  SurrogateDataset validation;
  SurrogateDataset test;
};

/// Shuffles the feasible rows with `seed`, reserves round(0.15 n) rows for
/// testing and splits the remainder 80/20 (validation = round(0.2 rest)).
/// Needs at least 10 feasible rows.
DataSplit split(const SurrogateDataset& ds, std::uint64_t seed, double test_fraction = 0.15,
                double validation_fraction = 0.20);

}  // namespace cybergen::surrogate
