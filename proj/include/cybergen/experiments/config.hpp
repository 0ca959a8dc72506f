#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cybergen/control/box_bfgs.hpp"
#include "cybergen/model/kinetics.hpp"
#include "cybergen/model/hybrid_model.hpp"
#include "cybergen/surrogate/training.hpp"

namespace cybergen::experiments {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Independent random streams derived from the root seed.
enum class SeedStream { split, training, noise };

/// Everything a run needs. Defaults reproduce the itaconate case study.
struct ScenarioConfig {
  std::uint64_t seed = 42;
  bool seed_given = false;  // the file named a seed

  // network and exploration grid
  std::string network = "bundled:itanet-mini";
  double acetate_per_growth = 0.5;
  std::size_t grid_points = 498;
  double grid_max_flux = 3.476;  // mmol/g_b/h on CADA

  // surrogate: a saved artifact, or trained from `dataset` (swept when empty)
  std::string surrogate_artifact;
  std::string dataset;
  surrogate::Hyperparameters hyper;

  model::KineticParams kinetics;
  model::CellType cell = model::CellType::prokaryote;

  // initial state
  double glc0 = 120.0, ita0 = 0.0, ace0 = 0.0, b0 = 0.05, e0 = 0.0;

  // horizon; one sample per control interval
  double t0 = 0.0;
  double tf = 24.0;
  std::size_t n_intervals = 24;
  double u_min = 0.0;
  double u_max = 5.0;
  double dt = 0.01;

  double mismatch = 1.04;  // controller-side factor on h
  double noise_std = 0.015;
  std::optional<std::uint64_t> noise_seed;

  double estimator_p = 10.0;
  double estimator_r = 1000.0;
  std::size_t estimator_window = 0;  // 0: full information

  std::vector<double> theta2_values{3.674e-5, 3.306e-5, 2.939e-5, 2.572e-5, 2.204e-5, 1.837e-5};

  control::BoxBfgsOptions solver;
  unsigned threads = 0;

  /// Throws ConfigError on unknown keys, wrong types or invalid values.
  static ScenarioConfig from_toml(std::string_view text, const std::filesystem::path& base_dir = {});
  static ScenarioConfig load(const std::filesystem::path& path);

  /// Resolved configuration as TOML; from_toml(to_toml()) round-trips.
  std::string to_toml() const;
  void validate() const;

  std::uint64_t stream_seed(SeedStream s) const;
};

/// Root seed: explicit flag, else config file, else CYBERGEN_SEED, else the
/// default.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_file,
                           std::uint64_t fallback = 42);

}  // namespace cybergen::experiments
