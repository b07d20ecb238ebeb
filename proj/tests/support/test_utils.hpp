#pragma once

#include <random>

#include "vswrist/spatial.hpp"

namespace vswrist::testing {

inline std::mt19937_64 make_rng(unsigned seed = 20260822u) {
  return std::mt19937_64(seed);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random pose with pitch kept away from the gimbal locus.
inline PoseVector random_pose(std::mt19937_64& rng) {
  PoseVector x;
  x.alpha_x = uniform(rng, -3.0, 3.0);
  x.alpha_y = uniform(rng, -1.3, 1.3);
  x.alpha_z = uniform(rng, -3.0, 3.0);
  x.x_c = uniform(rng, -100.0, 100.0);
  x.y_c = uniform(rng, -100.0, 100.0);
  x.z_c = uniform(rng, -100.0, 100.0);
  return x;
}

}  // namespace vswrist::testing
