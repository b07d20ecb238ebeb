#pragma once

#include <Eigen/Dense>
#include <array>

#include "vswrist/geometry.hpp"
#include "vswrist/spatial.hpp"

namespace vswrist {

struct LegJointAngles {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0, q4 = 0.0;
};

struct StackedJointAngles {
  LegJointAngles q_A, q_B, q_C;

  const LegJointAngles& leg(int k) const { return k == 0 ? q_A : (k == 1 ? q_B : q_C); }
  LegJointAngles& leg(int k) { return k == 0 ? q_A : (k == 1 ? q_B : q_C); }

  Eigen::Matrix<double, 12, 1> stacked() const {
    Eigen::Matrix<double, 12, 1> out;
    for (int k = 0; k < 3; ++k) {
      const LegJointAngles& q = leg(k);
      out.segment<4>(4 * k) << q.q1, q.q2, q.q3, q.q4;
    }
    return out;
  }
};

/// Commanded coupler tilts: alpha_y (radial/ulnar), alpha_z (flexion/extension).
struct MinimalCoords {
  double alpha_y = 0.0;
  double alpha_z = 0.0;
};

/// Result of the loop-closure solve at one u, including the sensitivity of
/// the dependent pose coordinates. Reusing a previous solution's v as the
/// seed makes tracking along a trajectory cheap.
struct ClosureSolution {
  Eigen::Vector4d v = Eigen::Vector4d::Zero();  // alpha_x, x_c, y_c, z_c
  Eigen::Matrix<double, 4, 2> dv_du = Eigen::Matrix<double, 4, 2>::Zero();
  double residual_norm = 0.0;
  int iterations = 0;
};

HomogeneousTransform leg_fk(const LegJointAngles& q, const LegGeometry& geom);
LegJointAngles leg_ik(const HomogeneousTransform& T, const LegGeometry& geom);

/// The five link-table rows whose composed transforms reproduce leg_fk
/// (row 0 is the fixed base twist and takes no joint variable).
std::array<DHRow, 5> leg_dh_rows(const LegGeometry& geom);

ClosureSolution solve_closure(const MinimalCoords& u, const WristGeometry& geom,
                              const Eigen::Vector4d* seed = nullptr);

PoseVector coupler_pose_from_u(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed = nullptr);

StackedJointAngles ik_all_legs(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed = nullptr);

Eigen::Matrix<double, 12, 2> jacobian_ik(const MinimalCoords& u,
                                         const WristGeometry& geom,
                                         const Eigen::Vector4d* seed = nullptr);

Eigen::Matrix<double, 3, 2> actuation_jacobian(const MinimalCoords& u,
                                               const WristGeometry& geom,
                                               const Eigen::Vector4d* seed = nullptr);

Eigen::Vector3d nullspace_base(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed = nullptr);

HomogeneousTransform end_effector_pose(const MinimalCoords& u, double theta_ps,
                                       const WristGeometry& geom,
                                       const Eigen::Vector4d* seed = nullptr);

/// Maps u-rates to the attachment point's spatial velocity (linear rows
/// first, then angular). attachment_offset is expressed in the coupler frame.
Eigen::Matrix<double, 6, 2> wrench_jacobian(const MinimalCoords& u,
                                            const Eigen::Vector3d& attachment_offset,
                                            const WristGeometry& geom,
                                            const Eigen::Vector4d* seed = nullptr);

void require_in_workspace(const MinimalCoords& u, const WristGeometry& geom);

namespace detail {
/// Closure solve without the workspace gate, for finite-difference probes
/// that may sit marginally outside the commanded box.
ClosureSolution solve_closure_unchecked(const MinimalCoords& u,
                                        const WristGeometry& geom,
                                        const Eigen::Vector4d* seed = nullptr);
}  // namespace detail

}  // namespace vswrist
