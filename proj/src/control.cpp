#include "vswrist/control.hpp"

#include <cmath>
#include <stdexcept>

namespace vswrist {

namespace {

constexpr double kGradientStep = 1e-3;  // N·mm, central difference on lambda

Eigen::Matrix2d compliance_from_context(double lambda,
                                        const ComplianceContext& ctx) {
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  for (int k = 0; k < 3; ++k) {
    const SpringParams& s = ctx.springs[k];
    const double delta =
        -s.delta0 * std::asinh(lambda * ctx.N(k) / (2.0 * s.K));
    const double stiff = spring_stiffness(delta, s);
    sigma.noalias() += stiff * ctx.Ja.row(k).transpose() * ctx.Ja.row(k);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw std::runtime_error("coupler stiffness is numerically singular");
  }
  return sigma.inverse();
}

}  // namespace

void validate_lm_params(const LMParams& lm) {
  if (!(lm.alpha > 0.0) || !(lm.nu > 0.0)) {
    throw std::invalid_argument("flow gains must be positive");
  }
  if (!(lm.lambda_bounds(0) < lm.lambda_bounds(1)) ||
      !lm.lambda_bounds.allFinite()) {
    throw std::invalid_argument("preload bounds must be ordered and finite");
  }
  if (!std::isfinite(lm.lambda_init) || lm.lambda_init < lm.lambda_bounds(0) ||
      lm.lambda_init > lm.lambda_bounds(1)) {
    throw std::invalid_argument("initial preload must sit inside the bounds");
  }
}

ComplianceContext make_compliance_context(const MinimalCoords& u,
                                          const std::array<SpringParams, 3>& springs,
                                          const WristGeometry& geom,
                                          const Eigen::Vector4d* seed) {
  ComplianceContext ctx;
  ctx.Ja = actuation_jacobian(u, geom, seed);
  ctx.N = nullspace_base(u, geom, seed);
  ctx.springs = springs;
  return ctx;
}

Eigen::Vector3d posture_reference(const MinimalCoords& u_ref,
                                  const WristGeometry& geom,
                                  const Eigen::Vector4d* seed) {
  const StackedJointAngles q = ik_all_legs(u_ref, geom, seed);
  return {q.q_A.q1, q.q_B.q1, q.q_C.q1};
}

double compliance_objective(double lambda, const ComplianceContext& ctx,
                            const Eigen::Matrix2d& c_ref) {
  if (!std::isfinite(lambda) || !c_ref.allFinite()) {
    throw std::invalid_argument("non-finite stiffness objective inputs");
  }
  return (compliance_from_context(lambda, ctx) - c_ref).norm();
}

double compliance_objective(double lambda, const MinimalCoords& u,
                            const Eigen::Matrix2d& c_ref,
                            const std::array<SpringParams, 3>& springs,
                            const WristGeometry& geom,
                            const Eigen::Vector4d* seed) {
  return compliance_objective(
      lambda, make_compliance_context(u, springs, geom, seed), c_ref);
}

double lambda_flow_step(double lambda, const ComplianceContext& ctx,
                        const Eigen::Matrix2d& c_ref, const LMParams& lm,
                        double dt) {
  validate_lm_params(lm);
  if (!(dt > 0.0)) throw std::invalid_argument("flow step needs dt > 0");
  if (!std::isfinite(lambda) || lambda < lm.lambda_bounds(0) ||
      lambda > lm.lambda_bounds(1)) {
    throw std::invalid_argument("preload outside its bounds");
  }

  const double g0 = compliance_objective(lambda, ctx, c_ref);
  const double gp = compliance_objective(lambda + kGradientStep, ctx, c_ref);
  const double gm = compliance_objective(lambda - kGradientStep, ctx, c_ref);
  const double hg = (gp - gm) / (2.0 * kGradientStep);

  const double rate = -lm.alpha * hg / (hg * hg + lm.nu) * g0;
  const double next = lambda + dt * rate;
  return std::min(std::max(next, lm.lambda_bounds(0)), lm.lambda_bounds(1));
}

double lambda_flow_step(double lambda, const MinimalCoords& u,
                        const Eigen::Matrix2d& c_ref, const LMParams& lm,
                        double dt, const std::array<SpringParams, 3>& springs,
                        const WristGeometry& geom, const Eigen::Vector4d* seed) {
  return lambda_flow_step(lambda, make_compliance_context(u, springs, geom, seed),
                          c_ref, lm, dt);
}

Eigen::Vector3d motor_references(const Eigen::Vector3d& q1_ref, double lambda,
                                 const Eigen::Vector3d& N,
                                 const std::array<SpringParams, 3>& params) {
  if (!q1_ref.allFinite() || !std::isfinite(lambda) || !N.allFinite()) {
    throw std::invalid_argument("non-finite motor reference inputs");
  }
  Eigen::Vector3d theta_ref;
  for (int k = 0; k < 3; ++k) {
    const SpringParams& s = params[k];
    theta_ref(k) =
        q1_ref(k) + s.delta0 * std::asinh(lambda * N(k) / (2.0 * s.K));
  }
  return theta_ref;
}

Eigen::Vector3d proportional_control(const Eigen::Vector3d& theta_ref,
                                     const Eigen::Vector3d& theta, double kp,
                                     double motor_tau) {
  if (!(kp > 0.0) || !(motor_tau > 0.0)) {
    throw std::invalid_argument("proportional control needs kp > 0, tau > 0");
  }
  if (!theta_ref.allFinite() || !theta.allFinite()) {
    throw std::invalid_argument("non-finite motor angles");
  }
  return theta + kp * motor_tau * (theta_ref - theta);
}

ControlCommand controller_tick(const SimState& state,
                               const ControlReferences& refs,
                               const ControllerParams& cp,
                               const WristGeometry& geom,
                               Eigen::Vector4d* ref_seed) {
  const Eigen::Vector4d* seed_in = ref_seed ? ref_seed : nullptr;

  const ClosureSolution sol = solve_closure(refs.u_ref, geom, seed_in);
  if (ref_seed) *ref_seed = sol.v;

  const Eigen::Vector3d q1_ref = posture_reference(refs.u_ref, geom, &sol.v);
  const ComplianceContext ctx =
      make_compliance_context(refs.u_ref, cp.springs, geom, &sol.v);

  ControlCommand out;
  out.lambda = lambda_flow_step(state.lambda_r, ctx, refs.compliance_ref, cp.lm,
                                cp.dt_ctrl);
  out.objective = compliance_objective(out.lambda, ctx, refs.compliance_ref);

  const Eigen::Vector3d theta_ref =
      motor_references(q1_ref, out.lambda, ctx.N, cp.springs);
  out.motor_command =
      proportional_control(theta_ref, state.theta, cp.kp, cp.motor_tau);
  out.theta_ps_command =
      state.theta_ps + cp.kp * cp.motor_tau * (refs.theta_ps_ref - state.theta_ps);
  return out;
}

}  // namespace vswrist
