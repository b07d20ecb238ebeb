#pragma once

#include <Eigen/Dense>
#include <array>

#include "vswrist/kinematics.hpp"

namespace vswrist {

struct SpringParams {
  double K = 4.0;          // elastic scale, N·mm
  double delta0 = 0.32;    // deflection scale, rad
  double delta_max = 2.5;  // saturation guard, rad
};

double spring_torque(double delta, const SpringParams& p);
double spring_stiffness(double delta, const SpringParams& p);

/// Elastic energy stored at deflection delta; its negative gradient is
/// spring_torque.
double spring_potential(double delta, const SpringParams& p);

/// Static stiffness of the coupler in minimal coordinates: the congruence of
/// the diagonal per-leg stiffness by the actuation jacobian.
Eigen::Matrix2d coupler_stiffness(const MinimalCoords& u,
                                  const Eigen::Vector3d& deflections,
                                  const std::array<SpringParams, 3>& params,
                                  const WristGeometry& geom,
                                  const Eigen::Vector4d* seed = nullptr);

Eigen::Matrix2d coupler_compliance(const MinimalCoords& u,
                                   const Eigen::Vector3d& deflections,
                                   const std::array<SpringParams, 3>& params,
                                   const WristGeometry& geom,
                                   const Eigen::Vector4d* seed = nullptr);

/// Torques lying in the kernel of the actuation map: they preload the legs
/// without exerting any wrench on the coupler.
Eigen::Vector3d internal_torques(double lambda, const Eigen::Vector3d& N);

/// Per-leg deflections each spring must hold so the spring torques realize
/// the internal preload lambda at posture u.
Eigen::Vector3d equilibrium_deflections(const MinimalCoords& u, double lambda,
                                        const std::array<SpringParams, 3>& params,
                                        const WristGeometry& geom,
                                        const Eigen::Vector4d* seed = nullptr);

}  // namespace vswrist
