#pragma once

#include <Eigen/Dense>
#include <array>

#include "vswrist/dynamics.hpp"
#include "vswrist/elasticity.hpp"
#include "vswrist/kinematics.hpp"

namespace vswrist {

struct ControlReferences {
  MinimalCoords u_ref{0.0, 0.0};
  double theta_ps_ref = 0.0;
  Eigen::Matrix2d compliance_ref = Eigen::Matrix2d::Identity();  // rad/(N·mm)
};

/// Parameters of the damped gradient flow that steers the preload.
struct LMParams {
  double alpha = 50.0;  // convergence-rate gain, 1/s
  double nu = 1e-16;    // damping, squared-gradient units
  double lambda_init = 100.0;
  Eigen::Vector2d lambda_bounds{-1000.0, 1000.0};
};

struct ControllerParams {
  LMParams lm;
  double kp = 40.0;  // closed-loop motor convergence rate, 1/s
  double dt_ctrl = 1e-3;
  double motor_tau = 0.02;
  std::array<SpringParams, 3> springs;
};

struct ControlCommand {
  Eigen::Vector3d motor_command = Eigen::Vector3d::Zero();
  double theta_ps_command = 0.0;
  double lambda = 0.0;
  double objective = 0.0;  // compliance mismatch after the flow update
};

/// Posture-dependent quantities the stiffness objective reuses across
/// evaluations at the same reference tilt.
struct ComplianceContext {
  Eigen::Matrix<double, 3, 2> Ja;
  Eigen::Vector3d N;
  std::array<SpringParams, 3> springs;
};

void validate_lm_params(const LMParams& lm);

ComplianceContext make_compliance_context(const MinimalCoords& u,
                                          const std::array<SpringParams, 3>& springs,
                                          const WristGeometry& geom,
                                          const Eigen::Vector4d* seed = nullptr);

/// First-joint reference angles for a commanded coupler tilt.
Eigen::Vector3d posture_reference(const MinimalCoords& u_ref,
                                  const WristGeometry& geom,
                                  const Eigen::Vector4d* seed = nullptr);

/// Frobenius mismatch between the achievable compliance at preload lambda and
/// the requested one.
double compliance_objective(double lambda, const ComplianceContext& ctx,
                            const Eigen::Matrix2d& c_ref);
double compliance_objective(double lambda, const MinimalCoords& u,
                            const Eigen::Matrix2d& c_ref,
                            const std::array<SpringParams, 3>& springs,
                            const WristGeometry& geom,
                            const Eigen::Vector4d* seed = nullptr);

/// One explicit-Euler step of the damped mismatch flow, clamped to bounds.
double lambda_flow_step(double lambda, const ComplianceContext& ctx,
                        const Eigen::Matrix2d& c_ref, const LMParams& lm,
                        double dt);
double lambda_flow_step(double lambda, const MinimalCoords& u,
                        const Eigen::Matrix2d& c_ref, const LMParams& lm,
                        double dt, const std::array<SpringParams, 3>& springs,
                        const WristGeometry& geom,
                        const Eigen::Vector4d* seed = nullptr);

/// Motor angles that realize preload lambda while the first joints sit at
/// q1_ref: theta_ref = q1_ref + delta0 * asinh(lambda N / (2K)) per leg.
Eigen::Vector3d motor_references(const Eigen::Vector3d& q1_ref, double lambda,
                                 const Eigen::Vector3d& N,
                                 const std::array<SpringParams, 3>& params);

/// Position command that closes the motor loop at rate kp: the first-order
/// motor lag is pre-compensated so theta converges to theta_ref like
/// exp(-kp t).
Eigen::Vector3d proportional_control(const Eigen::Vector3d& theta_ref,
                                     const Eigen::Vector3d& theta, double kp,
                                     double motor_tau);

/// Full control pipeline for one tick: posture reference, preload flow,
/// motor references, proportional command. Pure function of its inputs; the
/// caller stores the returned lambda back into the simulation state.
ControlCommand controller_tick(const SimState& state,
                               const ControlReferences& refs,
                               const ControllerParams& cp,
                               const WristGeometry& geom,
                               Eigen::Vector4d* ref_seed = nullptr);

}  // namespace vswrist
