#include "cybergen/surrogate/itanet_sweep.hpp"

namespace cybergen::surrogate {

GridSpec itanet_grid(std::size_t points, double max_flux) {
  return GridSpec{{GridAxis{"CADA", linspace(0.0, max_flux, points)}}};
}

SweepOptions itanet_sweep_options(double k_cada) {
  SweepOptions opts;
  opts.k_cat = {{"CADA", k_cada}};
  opts.feature_names = {{"CADA", "e_cadA"}};
  opts.labels = {{"v_bio", "BIO"}, {"v_ace", "ACE_ex"}, {"v_ita", "ITA_ex"}};
  return opts;
}

}  // namespace cybergen::surrogate
