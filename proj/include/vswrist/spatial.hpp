#pragma once

#include <Eigen/Dense>

#include "vswrist/core3.hpp"

namespace vswrist {

/// Rigid-body transform; the projective row [0 0 0 1] is implicit.
struct HomogeneousTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  HomogeneousTransform operator*(const HomogeneousTransform& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Eigen::Vector3d apply(const Eigen::Vector3d& v) const {
    return rotation * v + translation;
  }
  HomogeneousTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
};

/// Euler ZYX angles (rad) plus position of the coupler origin (mm).
struct PoseVector {
  double alpha_x = 0.0;
  double alpha_y = 0.0;
  double alpha_z = 0.0;
  double x_c = 0.0;
  double y_c = 0.0;
  double z_c = 0.0;
};

struct DHRow {
  double theta = 0.0;  // joint offset, rad
  double d = 0.0;      // link offset, mm
  double a = 0.0;      // link length, mm
  double alpha = 0.0;  // link twist, rad
};

enum class Axis { x, y, z };
enum class TransformKind { rotation, translation };

/// Wrap into (-pi, pi].
double normalize_angle(double a);

HomogeneousTransform elementary_transform(Axis axis, TransformKind kind, double p);

/// Tz(z_c) Ty(y_c) Tx(x_c) Rz(alpha_z) Ry(alpha_y) Rx(alpha_x)
HomogeneousTransform pose_to_transform(const PoseVector& x);

/// Inverse of pose_to_transform away from the alpha_y = +-pi/2 gimbal locus.
PoseVector transform_to_pose(const HomogeneousTransform& T);

/// Rz(theta + q) Tz(d) Rx(alpha) Tx(a)
HomogeneousTransform dh_transform(const DHRow& row, double q);

// Bridges between the Eigen-facing value types and the scalar-templated core.
inline Tf3<double> to_tf3(const HomogeneousTransform& T) {
  Tf3<double> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.R(r, c) = T.rotation(r, c);
  out.p = {T.translation(0), T.translation(1), T.translation(2)};
  return out;
}
inline HomogeneousTransform from_tf3(const Tf3<double>& T) {
  HomogeneousTransform out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.rotation(r, c) = T.R(r, c);
  out.translation << T.p.x, T.p.y, T.p.z;
  return out;
}

/// pose_to_transform generic over the scalar, for derivative passes.
template <typename T>
Tf3<T> pose_to_tf3(const T& ax, const T& ay, const T& az, const T& xc,
                   const T& yc, const T& zc) {
  return trans_z(zc) * trans_y(yc) * trans_x(xc) * rot_z(az) * rot_y(ay) *
         rot_x(ax);
}

}  // namespace vswrist
