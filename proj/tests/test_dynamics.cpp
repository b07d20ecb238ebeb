#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "support/test_utils.hpp"
#include "vswrist/dynamics.hpp"
#include "vswrist/elasticity.hpp"
#include "vswrist/kinematics.hpp"

using namespace vswrist;

namespace {

const WristGeometry kGeom;

DynParams default_params() { return DynParams::defaults(kGeom); }

DynParams point_mass_params(double mass, double offset) {
  DynParams p = default_params();
  for (auto& link : p.leg_links) {
    link.mass = 0.0;
    link.com.setZero();
    link.inertia.setZero();
  }
  p.coupler.mass = 0.0;
  p.coupler.inertia.setZero();
  p.payload_mass = mass;
  p.payload_offset = offset;
  return p;
}

MinimalCoords random_tilt(std::mt19937_64& rng, double box = 0.9) {
  return {testing::uniform(rng, -box, box), testing::uniform(rng, -box, box)};
}

Eigen::Vector3d relaxed_motor_angles(const MinimalCoords& u) {
  const StackedJointAngles Q = ik_all_legs(u, kGeom);
  return {Q.q_A.q1, Q.q_B.q1, Q.q_C.q1};
}

constexpr double kMassScale = 1e-3;

}  // namespace

TEST_CASE("mass matrix is symmetric positive definite across the workspace") {
  auto rng = testing::make_rng();
  const DynParams p = default_params();
  for (int trial = 0; trial < 50; ++trial) {
    const MinimalCoords u = random_tilt(rng);
    const Eigen::Vector2d ud(testing::uniform(rng, -2.0, 2.0),
                             testing::uniform(rng, -2.0, 2.0));
    const ReducedTerms terms = reduced_terms(u, ud, p, kGeom);
    const double scale = terms.M.cwiseAbs().maxCoeff();
    CHECK((terms.M - terms.M.transpose()).cwiseAbs().maxCoeff() <=
          1e-12 * scale);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(terms.M);
    CHECK(es.eigenvalues()(0) > 0.0);
  }
}

TEST_CASE("gravity term matches a finite difference of the potential") {
  auto rng = testing::make_rng(7u);
  const DynParams p = default_params();
  for (int trial = 0; trial < 20; ++trial) {
    const MinimalCoords u = random_tilt(rng, 0.8);
    const ReducedTerms terms = reduced_terms(u, Eigen::Vector2d::Zero(), p, kGeom);
    const double h = 1e-6;
    Eigen::Vector2d g_fd;
    for (int j = 0; j < 2; ++j) {
      MinimalCoords up = u, um = u;
      (j == 0 ? up.alpha_y : up.alpha_z) += h;
      (j == 0 ? um.alpha_y : um.alpha_z) -= h;
      g_fd(j) = (gravitational_potential(up, p, kGeom) -
                 gravitational_potential(um, p, kGeom)) /
                (2.0 * h);
    }
    const double scale = std::max(1.0, g_fd.cwiseAbs().maxCoeff());
    CHECK((terms.g - g_fd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
  }
}

TEST_CASE("pure payload reduces to the point mass metric") {
  auto rng = testing::make_rng(11u);
  const double mass = 0.5, offset = 80.0;
  const DynParams p = point_mass_params(mass, offset);
  for (int trial = 0; trial < 10; ++trial) {
    const MinimalCoords u = random_tilt(rng);
    const ReducedTerms terms = reduced_terms(u, Eigen::Vector2d::Zero(), p, kGeom);
    const Eigen::Matrix<double, 6, 2> Jw =
        wrench_jacobian(u, Eigen::Vector3d(offset, 0.0, 0.0), kGeom);
    const Eigen::Matrix<double, 3, 2> Jv = Jw.topRows<3>();
    const Eigen::Matrix2d expected = mass * kMassScale * Jv.transpose() * Jv;
    const double scale = std::max(1.0, expected.cwiseAbs().maxCoeff());
    CHECK((terms.M - expected).cwiseAbs().maxCoeff() <= 1e-8 * scale);

    const Eigen::Vector2d g_expected =
        -(mass * kMassScale * p.gravity.transpose() * Jv).transpose();
    const double gscale = std::max(1.0, g_expected.cwiseAbs().maxCoeff());
    CHECK((terms.g - g_expected).cwiseAbs().maxCoeff() <= 1e-6 * gscale);
  }
}

TEST_CASE("velocity product forces satisfy the power identity") {
  auto rng = testing::make_rng(13u);
  DynParams p = default_params();
  p.joint_damping.setZero();
  for (int trial = 0; trial < 15; ++trial) {
    const MinimalCoords u = random_tilt(rng, 0.8);
    const Eigen::Vector2d ud(testing::uniform(rng, -2.0, 2.0),
                             testing::uniform(rng, -2.0, 2.0));
    const ReducedTerms terms = reduced_terms(u, ud, p, kGeom);

    const double eps = 1e-5;
    const MinimalCoords up{u.alpha_y + eps * ud(0), u.alpha_z + eps * ud(1)};
    const MinimalCoords um{u.alpha_y - eps * ud(0), u.alpha_z - eps * ud(1)};
    const Eigen::Matrix2d M_dot =
        (reduced_terms(up, ud, p, kGeom).M - reduced_terms(um, ud, p, kGeom).M) /
        (2.0 * eps);

    const double power_h = ud.dot(terms.h);
    const double power_m = 0.5 * ud.dot(M_dot * ud);
    CHECK(power_h == doctest::Approx(power_m).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("antagonistic torques along the kernel produce no net force") {
  auto rng = testing::make_rng(17u);
  const DynParams p = point_mass_params(0.0, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const MinimalCoords u = random_tilt(rng);
    const double lambda = testing::uniform(rng, -800.0, 800.0);
    const Eigen::Vector3d tau = lambda * nullspace_base(u, kGeom);
    const Eigen::Vector2d F = applied_forces(
        u, tau, Eigen::Matrix<double, 6, 1>::Zero(), p, kGeom);
    CHECK(F.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, std::abs(lambda)));
  }
}

TEST_CASE("unit actuator torque maps through the actuation jacobian") {
  auto rng = testing::make_rng(19u);
  const DynParams p = point_mass_params(0.0, 0.0);
  for (int k = 0; k < 3; ++k) {
    const MinimalCoords u = random_tilt(rng);
    Eigen::Vector3d tau = Eigen::Vector3d::Zero();
    tau(k) = 1.0;
    const Eigen::Vector2d F = applied_forces(
        u, tau, Eigen::Matrix<double, 6, 1>::Zero(), p, kGeom);
    const Eigen::Matrix<double, 3, 2> Ja = actuation_jacobian(u, kGeom);
    CHECK((F.transpose() - Ja.row(k)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("external wrench maps through the payload point jacobian") {
  const MinimalCoords u{0.25, -0.4};
  const DynParams p = default_params();
  Eigen::Matrix<double, 6, 1> w;
  w << 3.0, -1.0, 2.0, 40.0, -10.0, 25.0;
  const Eigen::Vector2d F =
      applied_forces(u, Eigen::Vector3d::Zero(), w, p, kGeom);
  const Eigen::Matrix<double, 6, 2> Jw =
      wrench_jacobian(u, Eigen::Vector3d(p.payload_offset, 0.0, 0.0), kGeom);
  CHECK((F - Jw.transpose() * w).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("motor response is the exact first order exponential") {
  const Eigen::Vector3d theta0(0.1, -0.2, 0.3);
  const Eigen::Vector3d cmd(0.5, 0.5, -0.5);
  const double tau = 0.02;

  SUBCASE("command is a fixed point") {
    const Eigen::Vector3d next = motor_step(cmd, cmd, 1e-3, tau);
    CHECK((next - cmd).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("one time constant covers 63.2 percent of the gap") {
    const Eigen::Vector3d next = motor_step(theta0, cmd, tau, tau);
    const Eigen::Vector3d expected =
        cmd + (theta0 - cmd) * std::exp(-1.0);
    CHECK((next - expected).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("two half steps compose to one full step") {
    const double dt = 1e-3;
    const Eigen::Vector3d two =
        motor_step(motor_step(theta0, cmd, dt / 2.0, tau), cmd, dt / 2.0, tau);
    const Eigen::Vector3d one = motor_step(theta0, cmd, dt, tau);
    CHECK((two - one).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("bad dt or tau is rejected") {
    CHECK_THROWS_AS(motor_step(theta0, cmd, 0.0, tau), std::invalid_argument);
    CHECK_THROWS_AS(motor_step(theta0, cmd, 1e-3, 0.0), std::invalid_argument);
  }
}

TEST_CASE("undamped frozen motor run conserves mechanical energy") {
  DynParams p = default_params();
  p.joint_damping.setZero();
  p.gravity.setZero();
  const MinimalCoords u0{0.15, -0.1};
  SimState s = initial_state(u0, p, kGeom);
  s.theta += Eigen::Vector3d(0.05, -0.03, 0.02);
  const Eigen::Vector3d cmd = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();

  const double e0 = mechanical_energy(s.u, s.u_dot, s.theta, p, kGeom);
  double worst = 0.0;
  const int steps = 5000;
  for (int i = 0; i < steps; ++i) {
    s = step(s, cmd, 0.0, w, 1e-4, p, kGeom);
    const double e = mechanical_energy(s.u, s.u_dot, s.theta, p, kGeom,
                                       &s.closure_seed);
    worst = std::max(worst, std::abs(e - e0));
  }
  CHECK(worst <= 1e-7 * std::max(1.0, std::abs(e0)));
  CHECK(s.t == doctest::Approx(0.5));
}

TEST_CASE("damped run dissipates energy monotonically") {
  DynParams p = default_params();
  p.gravity.setZero();
  const MinimalCoords u0{0.3, 0.2};
  SimState s = initial_state(u0, p, kGeom);
  s.theta += Eigen::Vector3d(0.06, -0.04, 0.05);
  const Eigen::Vector3d cmd = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();

  double prev = mechanical_energy(s.u, s.u_dot, s.theta, p, kGeom);
  for (int i = 0; i < 2000; ++i) {
    s = step(s, cmd, 0.0, w, 1e-4, p, kGeom);
    const double e = mechanical_energy(s.u, s.u_dot, s.theta, p, kGeom,
                                       &s.closure_seed);
    CHECK(e <= prev + 1e-10 * std::max(1.0, std::abs(prev)));
    prev = e;
  }
}

TEST_CASE("kernel preload leaves the unloaded equilibrium untouched") {
  DynParams p = default_params();
  p.gravity.setZero();
  const MinimalCoords u_ref{0.2, -0.1};
  const Eigen::Vector3d q1_ref = relaxed_motor_angles(u_ref);
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();

  for (const double lambda : {-500.0, 0.0, 500.0}) {
    const Eigen::Vector3d delta = equilibrium_deflections(u_ref, lambda, p.springs, kGeom);
    const Eigen::Vector3d theta = q1_ref - delta;
    const MinimalCoords guess{u_ref.alpha_y + 1e-3, u_ref.alpha_z - 1e-3};
    const MinimalCoords u_eq = static_equilibrium(guess, theta, w, p, kGeom);
    CHECK(std::abs(u_eq.alpha_y - u_ref.alpha_y) <= 1e-8);
    CHECK(std::abs(u_eq.alpha_z - u_ref.alpha_z) <= 1e-8);
  }
}

TEST_CASE("axial gravity leaves the centered pose in equilibrium") {
  const DynParams p = default_params();
  const Eigen::Vector3d theta = relaxed_motor_angles({0.0, 0.0});
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
  const MinimalCoords u_eq =
      static_equilibrium({0.01, 0.01}, theta, w, p, kGeom);
  CHECK(std::abs(u_eq.alpha_y) <= 1e-9);
  CHECK(std::abs(u_eq.alpha_z) <= 1e-9);
}

TEST_CASE("transverse gravity pulls a preloaded wrist off center") {
  DynParams p = default_params();
  p.gravity = Eigen::Vector3d(0.0, 0.0, -9810.0);
  const MinimalCoords u_ref{0.0, 0.0};
  const Eigen::Vector3d delta =
      equilibrium_deflections(u_ref, 2000.0, p.springs, kGeom);
  const Eigen::Vector3d theta = relaxed_motor_angles(u_ref) - delta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
  const MinimalCoords u_eq = static_equilibrium({0.0, 0.0}, theta, w, p, kGeom);
  CHECK(std::hypot(u_eq.alpha_y, u_eq.alpha_z) > 1e-3);
  CHECK(std::hypot(u_eq.alpha_y, u_eq.alpha_z) < 1.0);

  const Eigen::Vector3d tau_a = elastic_actuation(
      ik_all_legs(u_eq, kGeom), theta, p.springs);
  const Eigen::Vector2d F = applied_forces(u_eq, tau_a, w, p, kGeom);
  const ReducedTerms terms =
      reduced_terms(u_eq, Eigen::Vector2d::Zero(), p, kGeom);
  CHECK((F - terms.g).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("initial state starts relaxed at the requested pose") {
  const DynParams p = default_params();
  const MinimalCoords u0{0.2, 0.35};
  const SimState s = initial_state(u0, p, kGeom);
  const Eigen::Vector3d q1 = relaxed_motor_angles(u0);
  CHECK((s.theta - q1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s.u_dot.norm() == 0.0);
  const double e = mechanical_energy(s.u, s.u_dot, s.theta, p, kGeom);
  const double v = gravitational_potential(s.u, p, kGeom);
  CHECK(e == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("projected dynamics track the constrained formulation") {
  const DynParams p = default_params();
  const MinimalCoords u0{0.12, -0.08};
  SimState s = initial_state(u0, p, kGeom);
  const Eigen::Vector3d theta = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();

  DaeState d = dae_initial_state(u0, Eigen::Vector2d::Zero(), kGeom);
  DaeDiagnostics diag;

  double worst_gap = 0.0, worst_drift = 0.0;
  const double dt = 1e-4;
  for (int i = 0; i < 2000; ++i) {
    s = step(s, theta, 0.0, w, dt, p, kGeom);
    d = dae_oracle_step(d, theta, w, dt, p, kGeom, &diag);
    worst_drift = std::max(worst_drift, diag.constraint_norm);
    const MinimalCoords u_dae = dae_extract_u(d, kGeom);
    worst_gap = std::max(worst_gap,
                         std::max(std::abs(s.u.alpha_y - u_dae.alpha_y),
                                  std::abs(s.u.alpha_z - u_dae.alpha_z)));
  }
  CHECK(worst_gap <= 1e-6);
  CHECK(worst_drift <= 1e-8);
}

TEST_CASE("constrained formulation keeps its acceleration residual small") {
  const DynParams p = default_params();
  DaeState d = dae_initial_state({0.3, 0.1}, Eigen::Vector2d(0.5, -0.4), kGeom);
  const Eigen::Vector3d theta = relaxed_motor_angles({0.3, 0.1});
  Eigen::Matrix<double, 6, 1> w;
  w << 0.0, 2.0, -1.0, 0.0, 30.0, 0.0;
  DaeDiagnostics diag;
  for (int i = 0; i < 50; ++i) {
    d = dae_oracle_step(d, theta, w, 1e-4, p, kGeom, &diag);
    CHECK(diag.constraint_norm <= 1e-9);
  }
}

TEST_CASE("leaving the workspace halts the simulation") {
  const DynParams p = default_params();
  SimState s = initial_state({kGeom.u_max - 0.005, 0.0}, p, kGeom);
  s.u_dot = Eigen::Vector2d(10.0, 0.0);
  const Eigen::Vector3d cmd = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();

  bool halted = false;
  try {
    for (int i = 0; i < 100; ++i) {
      s = step(s, cmd, 0.0, w, 1e-4, p, kGeom);
    }
  } catch (const SimulationHalt& e) {
    halted = true;
    CHECK(std::string(e.what()).find("halted") != std::string::npos);
  }
  CHECK(halted);
}

TEST_CASE("spring saturation halts the simulation") {
  const DynParams p = default_params();
  SimState s = initial_state({0.1, 0.0}, p, kGeom);
  s.theta(0) -= 2.6;
  const Eigen::Vector3d cmd = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
  CHECK_THROWS_AS(step(s, cmd, 0.0, w, 1e-4, p, kGeom), SimulationHalt);
}

TEST_CASE("step size outside the stability budget is rejected") {
  const DynParams p = default_params();
  const SimState s = initial_state({0.0, 0.0}, p, kGeom);
  const Eigen::Vector3d cmd = s.theta;
  const Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
  CHECK_THROWS_AS(step(s, cmd, 0.0, w, 0.0, p, kGeom), std::invalid_argument);
  CHECK_THROWS_AS(step(s, cmd, 0.0, w, -1e-4, p, kGeom), std::invalid_argument);
  CHECK_THROWS_AS(step(s, cmd, 0.0, w, 2e-4, p, kGeom), std::invalid_argument);
  CHECK_NOTHROW(step(s, cmd, 0.0, w, 1e-4, p, kGeom));
}

TEST_CASE("malformed dynamic parameters are rejected") {
  DynParams p = default_params();
  p.leg_links[0].mass = -0.1;
  CHECK_THROWS_AS(validate_dyn_params(p), std::invalid_argument);

  p = default_params();
  p.leg_links[1].inertia(0, 1) = 5.0;
  CHECK_THROWS_AS(validate_dyn_params(p), std::invalid_argument);

  p = default_params();
  p.coupler.inertia = Eigen::Vector3d(100.0, 1.0, 1.0).asDiagonal();
  CHECK_THROWS_AS(validate_dyn_params(p), std::invalid_argument);

  p = default_params();
  p.motor_tau = 0.0;
  CHECK_THROWS_AS(validate_dyn_params(p), std::invalid_argument);

  p = default_params();
  p.joint_damping(3) = -1.0;
  CHECK_THROWS_AS(validate_dyn_params(p), std::invalid_argument);

  CHECK_NOTHROW(validate_dyn_params(default_params()));
}
