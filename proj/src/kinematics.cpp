#include "vswrist/kinematics.hpp"

#include <cmath>
#include <stdexcept>

#include "vswrist/chain.hpp"
#include "vswrist/dual.hpp"

namespace vswrist {

namespace {

using D2 = Dual<double, 2>;
using D4 = Dual<double, 4>;

std::array<double, 4> to_core(const LegJointAngles& q) {
  return {q.q1, q.q2, q.q3, q.q4};
}

Eigen::Vector4d center_seed(const WristGeometry& g) {
  return {0.0, g.center_axial(), 0.0, 0.0};
}

Eigen::Matrix<double, 18, 1> residual_value(const MinimalCoords& u,
                                            const Eigen::Vector4d& v,
                                            const WristGeometry& g) {
  const std::array<double, 4> vv = {v(0), v(1), v(2), v(3)};
  const std::array<double, 18> r = closure_residual(u.alpha_y, u.alpha_z, vv, g);
  Eigen::Matrix<double, 18, 1> out;
  for (int i = 0; i < 18; ++i) out(i) = r[i];
  return out;
}

/// Residual Jacobian with respect to the four closure coordinates.
Eigen::Matrix<double, 18, 4> residual_jacobian_v(const MinimalCoords& u,
                                                 const Eigen::Vector4d& v,
                                                 const WristGeometry& g) {
  std::array<D4, 4> vv;
  for (int i = 0; i < 4; ++i) vv[i] = D4::seeded(v(i), i);
  const std::array<D4, 18> r =
      closure_residual(D4(u.alpha_y), D4(u.alpha_z), vv, g);
  Eigen::Matrix<double, 18, 4> J;
  for (int i = 0; i < 18; ++i)
    for (int j = 0; j < 4; ++j) J(i, j) = r[i].der[j];
  return J;
}

Eigen::Matrix<double, 18, 2> residual_jacobian_u(const MinimalCoords& u,
                                                 const Eigen::Vector4d& v,
                                                 const WristGeometry& g) {
  const std::array<D2, 4> vv = {D2(v(0)), D2(v(1)), D2(v(2)), D2(v(3))};
  const std::array<D2, 18> r =
      closure_residual(D2::seeded(u.alpha_y, 0), D2::seeded(u.alpha_z, 1), vv, g);
  Eigen::Matrix<double, 18, 2> J;
  for (int i = 0; i < 18; ++i)
    for (int j = 0; j < 2; ++j) J(i, j) = r[i].der[j];
  return J;
}

constexpr int kMaxIterations = 50;
constexpr double kTargetTol = 1e-12;  // keep polishing down to here
constexpr double kAcceptTol = 1e-9;   // good enough if progress stalls

/// Gauss-Newton with backtracking on the closure residual. Returns false if
/// it fails to reach tolerance from this seed.
bool gauss_newton(const MinimalCoords& u, const WristGeometry& g,
                  Eigen::Vector4d& v, double& rnorm, int& iters) {
  Eigen::Matrix<double, 18, 1> r = residual_value(u, v, g);
  rnorm = r.norm();
  for (iters = 0; iters < kMaxIterations; ++iters) {
    if (rnorm < kTargetTol) return true;
    const Eigen::Matrix<double, 18, 4> J = residual_jacobian_v(u, v, g);
    const Eigen::Vector4d step = J.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) return false;
    double scale = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      const Eigen::Vector4d trial = v + scale * step;
      const Eigen::Matrix<double, 18, 1> rt = residual_value(u, trial, g);
      const double tn = rt.norm();
      if (tn < rnorm) {
        v = trial;
        r = rt;
        rnorm = tn;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return rnorm < kAcceptTol;
  }
  return rnorm < kAcceptTol;
}

}  // namespace

void require_in_workspace(const MinimalCoords& u, const WristGeometry& geom) {
  if (!std::isfinite(u.alpha_y) || !std::isfinite(u.alpha_z)) {
    throw std::invalid_argument("non-finite coupler tilt");
  }
  const double bound = geom.u_max + 1e-12;
  if (std::abs(u.alpha_y) > bound || std::abs(u.alpha_z) > bound) {
    throw std::domain_error("coupler tilt outside workspace bound");
  }
}

HomogeneousTransform leg_fk(const LegJointAngles& q, const LegGeometry& geom) {
  for (double v : {q.q1, q.q2, q.q3, q.q4}) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite joint angle");
  }
  return from_tf3(leg_chain(to_core(q), geom));
}

LegJointAngles leg_ik(const HomogeneousTransform& T, const LegGeometry& geom) {
  const Tf3<double> target = to_tf3(T);
  const double arg = ik_acos_argument(target, geom);
  if (!std::isfinite(arg)) throw std::invalid_argument("non-finite pose");
  if (std::abs(arg) > 1.0 + 1e-9) {
    throw std::domain_error("pose unreachable for leg: elbow projection out of range");
  }
  const std::array<double, 4> q = leg_ik_core(target, geom);
  return {normalize_angle(q[0]), q[1], q[2], normalize_angle(q[3])};
}

std::array<DHRow, 5> leg_dh_rows(const LegGeometry& geom) {
  const double base = geom.eta + geom.azimuth;
  return {DHRow{0.0, 0.0, 0.0, base},
          DHRow{0.0, 0.0, 0.0, M_PI / 2},
          DHRow{0.0, geom.d, 0.0, -geom.alpha},
          DHRow{0.0, -geom.d, 0.0, M_PI / 2},
          DHRow{0.0, 0.0, 0.0, M_PI - base}};
}

ClosureSolution solve_closure(const MinimalCoords& u, const WristGeometry& geom,
                              const Eigen::Vector4d* seed) {
  require_in_workspace(u, geom);
  return detail::solve_closure_unchecked(u, geom, seed);
}

ClosureSolution detail::solve_closure_unchecked(const MinimalCoords& u,
                                                const WristGeometry& geom,
                                                const Eigen::Vector4d* seed) {
  if (!std::isfinite(u.alpha_y) || !std::isfinite(u.alpha_z)) {
    throw std::invalid_argument("non-finite coupler tilt");
  }
  ClosureSolution sol;
  sol.v = (seed && seed->allFinite()) ? *seed : center_seed(geom);

  bool ok = gauss_newton(u, geom, sol.v, sol.residual_norm, sol.iterations);
  if (!ok) {
    // Walk in from the central posture, halving the step until each
    // intermediate solve converges, then finish at the requested u.
    Eigen::Vector4d v = center_seed(geom);
    double t = 0.0, step = 1.0;
    int guard = 0;
    while (t < 1.0 && guard++ < 64) {
      const double tn = std::min(1.0, t + step);
      MinimalCoords um{tn * u.alpha_y, tn * u.alpha_z};
      Eigen::Vector4d vt = v;
      double rn;
      int it;
      if (gauss_newton(um, geom, vt, rn, it)) {
        v = vt;
        t = tn;
        step = std::min(1.0, step * 2.0);
      } else {
        step *= 0.5;
        if (step < 1e-4) break;
      }
    }
    sol.v = v;
    ok = (t >= 1.0) &&
         gauss_newton(u, geom, sol.v, sol.residual_norm, sol.iterations);
    if (!ok) throw std::runtime_error("loop closure failed to converge");
  }

  const Eigen::Matrix<double, 18, 4> Jv = residual_jacobian_v(u, sol.v, geom);
  const Eigen::Matrix<double, 18, 2> Ju = residual_jacobian_u(u, sol.v, geom);
  sol.dv_du = -Jv.colPivHouseholderQr().solve(Ju);
  return sol;
}

PoseVector coupler_pose_from_u(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed) {
  const ClosureSolution sol = solve_closure(u, geom, seed);
  PoseVector x;
  x.alpha_x = normalize_angle(sol.v(0));
  x.alpha_y = u.alpha_y;
  x.alpha_z = u.alpha_z;
  x.x_c = sol.v(1);
  x.y_c = sol.v(2);
  x.z_c = sol.v(3);
  return x;
}

StackedJointAngles ik_all_legs(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed) {
  const PoseVector x = coupler_pose_from_u(u, geom, seed);
  const HomogeneousTransform T = pose_to_transform(x);
  StackedJointAngles Q;
  for (int k = 0; k < 3; ++k) Q.leg(k) = leg_ik(T, geom.leg(k));
  return Q;
}

namespace {

/// Everything downstream shares this pass: u and the closure coordinates
/// enter as two-lane duals (closure lanes filled from dv_du), so joint
/// angles and frames carry exact u-derivatives.
struct DualPass {
  std::array<D2, 4> q[3];
  Tf3<D2> coupler;
};

DualPass dual_pass(const MinimalCoords& u, const ClosureSolution& sol,
                   const WristGeometry& geom) {
  const D2 ay = D2::seeded(u.alpha_y, 0);
  const D2 az = D2::seeded(u.alpha_z, 1);
  std::array<D2, 4> v;
  for (int i = 0; i < 4; ++i) {
    v[i] = D2(sol.v(i), {sol.dv_du(i, 0), sol.dv_du(i, 1)});
  }
  DualPass out;
  out.coupler = coupler_tf(ay, az, v);
  for (int k = 0; k < 3; ++k) {
    out.q[k] = leg_ik_core(out.coupler, geom.leg(k));
  }
  return out;
}

}  // namespace

Eigen::Matrix<double, 12, 2> jacobian_ik(const MinimalCoords& u,
                                         const WristGeometry& geom,
                                         const Eigen::Vector4d* seed) {
  const ClosureSolution sol = solve_closure(u, geom, seed);
  const DualPass pass = dual_pass(u, sol, geom);
  Eigen::Matrix<double, 12, 2> J;
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 4; ++j) {
      J(4 * k + j, 0) = pass.q[k][j].der[0];
      J(4 * k + j, 1) = pass.q[k][j].der[1];
    }
  }
  return J;
}

Eigen::Matrix<double, 3, 2> actuation_jacobian(const MinimalCoords& u,
                                               const WristGeometry& geom,
                                               const Eigen::Vector4d* seed) {
  const Eigen::Matrix<double, 12, 2> J = jacobian_ik(u, geom, seed);
  Eigen::Matrix<double, 3, 2> Ja;
  Ja.row(0) = J.row(0);
  Ja.row(1) = J.row(4);
  Ja.row(2) = J.row(8);
  const Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(Ja);
  if (svd.singularValues()(1) < 1e-6) {
    throw std::runtime_error("actuation jacobian lost rank inside workspace");
  }
  return Ja;
}

Eigen::Vector3d nullspace_base(const MinimalCoords& u, const WristGeometry& geom,
                               const Eigen::Vector4d* seed) {
  const Eigen::Matrix<double, 3, 2> Ja = actuation_jacobian(u, geom, seed);
  Eigen::Vector3d n = Ja.col(0).cross(Ja.col(1));
  const double norm = n.norm();
  if (norm < 1e-12) {
    throw std::runtime_error("nullspace direction undefined");
  }
  n /= norm;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(n(i)) > 1e-12) {
      if (n(i) < 0.0) n = -n;
      break;
    }
  }
  return n;
}

HomogeneousTransform end_effector_pose(const MinimalCoords& u, double theta_ps,
                                       const WristGeometry& geom,
                                       const Eigen::Vector4d* seed) {
  if (!std::isfinite(theta_ps)) throw std::invalid_argument("non-finite theta_ps");
  const PoseVector x = coupler_pose_from_u(u, geom, seed);
  return pose_to_transform(x) *
         elementary_transform(Axis::x, TransformKind::rotation, theta_ps);
}

Eigen::Matrix<double, 6, 2> wrench_jacobian(const MinimalCoords& u,
                                            const Eigen::Vector3d& attachment_offset,
                                            const WristGeometry& geom,
                                            const Eigen::Vector4d* seed) {
  if (!attachment_offset.allFinite()) {
    throw std::invalid_argument("non-finite attachment offset");
  }
  const ClosureSolution sol = solve_closure(u, geom, seed);
  const DualPass pass = dual_pass(u, sol, geom);

  const Vec3T<D2> offset{D2(attachment_offset(0)), D2(attachment_offset(1)),
                         D2(attachment_offset(2))};
  const Vec3T<D2> p = pass.coupler.apply(offset);

  Eigen::Matrix<double, 6, 2> J;
  for (int lane = 0; lane < 2; ++lane) {
    J(0, lane) = p.x.der[lane];
    J(1, lane) = p.y.der[lane];
    J(2, lane) = p.z.der[lane];
    // Spatial angular velocity: vee(dR R^T) per lane.
    Eigen::Matrix3d R, dR;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        R(r, c) = pass.coupler.R(r, c).val;
        dR(r, c) = pass.coupler.R(r, c).der[lane];
      }
    const Eigen::Matrix3d W = dR * R.transpose();
    J(3, lane) = W(2, 1);
    J(4, lane) = W(0, 2);
    J(5, lane) = W(1, 0);
  }
  return J;
}

}  // namespace vswrist
