#pragma once

#include <array>
#include <cmath>

namespace vswrist {

struct LegGeometry {
  double d = 49.0;          // link offset, mm
  double alpha = M_PI / 4;  // link twist, rad
  double eta = M_PI / 4;    // leg tilt from the base axis, rad
  double azimuth = 0.0;     // leg placement angle about the base axis, rad
};

/// Three identical legs evenly distributed about the base axis.
struct WristGeometry {
  double d = 49.0;
  double alpha = M_PI / 4;
  double eta = M_PI / 4;
  double u_max = M_PI / 3;  // workspace half-width on each tilt angle, rad

  static constexpr std::array<double, 3> azimuths = {0.0, 2.0 * M_PI / 3.0,
                                                     4.0 * M_PI / 3.0};

  LegGeometry leg(int k) const { return {d, alpha, eta, azimuths[k]}; }

  /// Axial coordinate of the coupler origin at the central posture.
  double center_axial() const { return d * std::sqrt(2.0 * (1.0 - std::cos(alpha))); }
};

}  // namespace vswrist
