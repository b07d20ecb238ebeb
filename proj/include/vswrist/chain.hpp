#pragma once

#include <array>
#include <cmath>

#include "vswrist/core3.hpp"
#include "vswrist/geometry.hpp"

namespace vswrist {

// Scalar-generic leg chain. Everything here runs on double for values and on
// Dual<...> for derivative passes; the same expressions serve both, so there
// is no separate "analytic Jacobian" code path to keep in sync.

/// Base-to-coupler transform of one leg. The five factors are the DH rows of
/// the leg table: a pure twist to the leg's tilted base plane, two revolute
/// joints separated by the d offset, the mirrored offset back, and the twist
/// that re-aligns the coupler attachment.
template <typename T>
Tf3<T> leg_chain(const std::array<T, 4>& q, const LegGeometry& g) {
  const double base = g.eta + g.azimuth;
  return rot_x(T(base)) * rot_z(q[0]) * rot_x(T(M_PI / 2)) * rot_z(q[1]) *
         trans_z(T(g.d)) * rot_x(T(-g.alpha)) * rot_z(q[2]) *
         trans_z(T(-g.d)) * rot_x(T(M_PI / 2)) * rot_z(q[3]) *
         rot_x(T(M_PI - base));
}

/// Closed-form joint extraction for one leg given the coupler transform.
/// The elbow angle comes from the axial projection of the de-rotated coupler
/// position; the base angle solves the remaining planar 2x2 system exactly.
/// The acos argument is clamped so solver iterates slightly off the closure
/// manifold stay finite; reachability is enforced at the public entry point.
template <typename T>
std::array<T, 4> leg_ik_core(const Tf3<T>& target, const LegGeometry& g) {
  const double caz = std::cos(g.azimuth), saz = std::sin(g.azimuth);
  const double ce = std::cos(g.eta), se = std::sin(g.eta);
  const double ca = std::cos(g.alpha), sa = std::sin(g.alpha);

  const T xp = target.p.x;
  const T yp = caz * target.p.y + saz * target.p.z;
  const T zp = caz * target.p.z - saz * target.p.y;

  const T arg = (se * yp - ce * zp) * (1.0 / (g.d * sa));
  const T q2 = acos_clamped(arg);
  using std::atan2;
  using std::sin;
  const T s2 = sin(q2);
  const T mid = ce * yp + se * zp;
  const T q1 = atan2(xp * (1.0 - ca) + mid * (sa * s2),
                     xp * (sa * s2) - mid * (1.0 - ca));
  return {q1, q2, q2 + T(M_PI), -q1};
}

template <typename T>
T ik_acos_argument(const Tf3<T>& target, const LegGeometry& g) {
  const double caz = std::cos(g.azimuth), saz = std::sin(g.azimuth);
  const double ce = std::cos(g.eta), se = std::sin(g.eta);
  const T yp = caz * target.p.y + saz * target.p.z;
  const T zp = caz * target.p.z - saz * target.p.y;
  return (se * yp - ce * zp) * (1.0 / (g.d * std::sin(g.alpha)));
}

/// Link frames of one leg, as prefix products of the chain factors. Frame k
/// moves with joint k; centers of mass and inertia tensors are expressed in
/// these frames when assembling dynamics.
template <typename T>
struct LegFrames {
  Tf3<T> s1, s2, s3;  // after joints 1..3
  Tf3<T> coupler;     // full chain
};

template <typename T>
LegFrames<T> leg_link_frames(const std::array<T, 4>& q, const LegGeometry& g) {
  const double base = g.eta + g.azimuth;
  LegFrames<T> out;
  out.s1 = rot_x(T(base)) * rot_z(q[0]) * rot_x(T(M_PI / 2));
  out.s2 = out.s1 * (rot_z(q[1]) * trans_z(T(g.d)) * rot_x(T(-g.alpha)));
  out.s3 = out.s2 * (rot_z(q[2]) * trans_z(T(-g.d)) * rot_x(T(M_PI / 2)));
  out.coupler = out.s3 * (rot_z(q[3]) * rot_x(T(M_PI - base)));
  return out;
}

/// Coupler transform from the two commanded tilts plus the four closure
/// coordinates v = (alpha_x, x_c, y_c, z_c).
template <typename T>
Tf3<T> coupler_tf(const T& alpha_y, const T& alpha_z, const std::array<T, 4>& v) {
  return pose_to_tf3(v[0], alpha_y, alpha_z, v[1], v[2], v[3]);
}

/// Loop-closure residual: for each leg, the mismatch between the target
/// coupler transform and the chain evaluated at that leg's extracted joints.
/// Position rows are in mm; rotation rows are the antisymmetric part of
/// R_targetᵀ R_leg scaled by d so both blocks share a length scale.
template <typename T>
std::array<T, 18> closure_residual(const T& alpha_y, const T& alpha_z,
                                   const std::array<T, 4>& v,
                                   const WristGeometry& g) {
  const Tf3<T> target = coupler_tf(alpha_y, alpha_z, v);
  std::array<T, 18> r;
  for (int k = 0; k < 3; ++k) {
    const LegGeometry leg = g.leg(k);
    const std::array<T, 4> q = leg_ik_core(target, leg);
    const Tf3<T> reached = leg_chain(q, leg);
    const Vec3T<T> dp = reached.p - target.p;
    const Mat3T<T> rerr = target.R.transposed() * reached.R;
    const Mat3T<T> s = rerr - rerr.transposed();
    r[6 * k + 0] = dp.x;
    r[6 * k + 1] = dp.y;
    r[6 * k + 2] = dp.z;
    r[6 * k + 3] = T(0.5 * g.d) * s(2, 1);
    r[6 * k + 4] = T(0.5 * g.d) * s(0, 2);
    r[6 * k + 5] = T(0.5 * g.d) * s(1, 0);
  }
  return r;
}

}  // namespace vswrist
