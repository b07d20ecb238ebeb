#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

#include "vswrist/elasticity.hpp"
#include "vswrist/kinematics.hpp"

namespace vswrist {

/// Raised when an integration run must stop (workspace exit, spring
/// saturation); distinct from numerical failures so callers can tell an
/// out-of-envelope trajectory from a broken solve.
struct SimulationHalt : std::runtime_error {
  explicit SimulationHalt(const std::string& what) : std::runtime_error(what) {}
};

struct LinkInertia {
  double mass = 0.0;                                    // kg
  Eigen::Vector3d com = Eigen::Vector3d::Zero();        // mm, local frame
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Zero();    // kg·mm², about COM
};

struct DynParams {
  std::array<LinkInertia, 3> leg_links;  // shared by the three legs
  LinkInertia coupler;                   // expressed in the coupler frame
  double payload_mass = 0.3;             // kg
  double payload_offset = 100.0;         // mm along the coupler axis
  std::array<SpringParams, 3> springs{};
  Eigen::Matrix<double, 12, 1> joint_damping =
      Eigen::Matrix<double, 12, 1>::Constant(0.5);     // N·mm·s/rad
  Eigen::Vector3d gravity{-9810.0, 0.0, 0.0};          // mm/s², base frame
  double motor_tau = 0.02;                             // s
  double dt_max = 1e-4;                                // s

  /// Link masses and tensors are estimates shaped like the real parts (hub,
  /// two rods, coupler disc) and sized to the device's moving-mass budget.
  static DynParams defaults(const WristGeometry& geom);
};

struct SimState {
  MinimalCoords u;
  Eigen::Vector2d u_dot = Eigen::Vector2d::Zero();   // rad/s
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();   // motor angles, rad
  double theta_ps = 0.0;                             // rad
  double lambda_r = 0.0;                             // preload reference, N·mm
  double t = 0.0;                                    // s
  Eigen::Vector4d closure_seed = Eigen::Vector4d::Zero();
  bool seeded = false;
};

struct ReducedTerms {
  Eigen::Matrix2d M;   // t·mm² (numerically N·mm·s²/rad)
  Eigen::Vector2d h;   // velocity-product plus damping forces, N·mm
  Eigen::Vector2d g;   // gravity gradient, N·mm
};

void validate_dyn_params(const DynParams& p);

ReducedTerms reduced_terms(const MinimalCoords& u, const Eigen::Vector2d& u_dot,
                           const DynParams& p, const WristGeometry& geom,
                           const Eigen::Vector4d* seed = nullptr);

/// Generalized force of the leg actuation torques plus an external wrench
/// applied at the payload attachment point. w_e stacks force (N) over
/// torque (N·mm).
Eigen::Vector2d applied_forces(const MinimalCoords& u, const Eigen::Vector3d& tau_a,
                               const Eigen::Matrix<double, 6, 1>& w_e,
                               const DynParams& p, const WristGeometry& geom,
                               const Eigen::Vector4d* seed = nullptr);

/// Per-leg spring torques at the current motor angles.
Eigen::Vector3d elastic_actuation(const StackedJointAngles& Q,
                                  const Eigen::Vector3d& theta,
                                  const std::array<SpringParams, 3>& springs);

/// First-order motor lag, exact exponential update.
Eigen::Vector3d motor_step(const Eigen::Vector3d& theta,
                           const Eigen::Vector3d& command, double dt, double tau);

SimState step(const SimState& state, const Eigen::Vector3d& command,
              double theta_ps_cmd, const Eigen::Matrix<double, 6, 1>& w_e,
              double dt, const DynParams& p, const WristGeometry& geom);

/// Rest state at posture u0 with motors holding zero deflection.
SimState initial_state(const MinimalCoords& u0, const DynParams& p,
                       const WristGeometry& geom);

double gravitational_potential(const MinimalCoords& u, const DynParams& p,
                               const WristGeometry& geom,
                               const Eigen::Vector4d* seed = nullptr);

/// Kinetic plus gravitational plus spring energy, N·mm.
double mechanical_energy(const MinimalCoords& u, const Eigen::Vector2d& u_dot,
                         const Eigen::Vector3d& theta, const DynParams& p,
                         const WristGeometry& geom,
                         const Eigen::Vector4d* seed = nullptr);

/// Posture where spring torques, gravity, and the external wrench balance.
MinimalCoords static_equilibrium(const MinimalCoords& guess,
                                 const Eigen::Vector3d& theta,
                                 const Eigen::Matrix<double, 6, 1>& w_e,
                                 const DynParams& p, const WristGeometry& geom);

// Unreduced cross-check formulation over all twelve joint coordinates with
// explicit constraint forces. Slower than the reduced model by design; used
// to validate it.

struct DaeState {
  Eigen::Matrix<double, 12, 1> Q = Eigen::Matrix<double, 12, 1>::Zero();
  Eigen::Matrix<double, 12, 1> Q_dot = Eigen::Matrix<double, 12, 1>::Zero();
  double t = 0.0;
};

struct DaeDiagnostics {
  double constraint_norm = 0.0;   // closure drift after the step
  double accel_residual = 0.0;    // constraint-acceleration solve residual
};

DaeState dae_initial_state(const MinimalCoords& u0, const Eigen::Vector2d& u_dot0,
                           const WristGeometry& geom);

DaeState dae_oracle_step(const DaeState& state, const Eigen::Vector3d& theta,
                         const Eigen::Matrix<double, 6, 1>& w_e, double dt,
                         const DynParams& p, const WristGeometry& geom,
                         DaeDiagnostics* diag = nullptr);

MinimalCoords dae_extract_u(const DaeState& state, const WristGeometry& geom);

}  // namespace vswrist
