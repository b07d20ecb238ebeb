#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "support/test_utils.hpp"
#include "vswrist/elasticity.hpp"

using namespace vswrist;

namespace {

const WristGeometry kGeom;
const SpringParams kSpring;
const std::array<SpringParams, 3> kSprings = {kSpring, kSpring, kSpring};

}  // namespace

TEST_CASE("spring torque follows the hyperbolic law") {
  CHECK(spring_torque(0.0, kSpring) == 0.0);
  CHECK(spring_torque(0.32, kSpring) ==
        doctest::Approx(-8.0 * std::sinh(1.0)).epsilon(1e-12));
  CHECK(spring_torque(0.32, kSpring) == doctest::Approx(-9.401609549).epsilon(1e-8));

  auto rng = testing::make_rng(21);
  for (int i = 0; i < 50; ++i) {
    const double d = testing::uniform(rng, -2.4, 2.4);
    CHECK(spring_torque(-d, kSpring) ==
          doctest::Approx(-spring_torque(d, kSpring)).epsilon(1e-12));
  }
}

TEST_CASE("spring stiffness is the negative torque slope") {
  CHECK(spring_stiffness(0.0, kSpring) == doctest::Approx(25.0).epsilon(1e-14));

  auto rng = testing::make_rng(22);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const double d = testing::uniform(rng, -2.0, 2.0);
    CHECK(spring_stiffness(-d, kSpring) ==
          doctest::Approx(spring_stiffness(d, kSpring)).epsilon(1e-12));
    const double fd =
        (spring_torque(d + h, kSpring) - spring_torque(d - h, kSpring)) / (2 * h);
    CHECK(std::abs(fd + spring_stiffness(d, kSpring)) <
          1e-6 * std::abs(spring_stiffness(d, kSpring)));
  }
}

TEST_CASE("spring potential integrates the torque law") {
  CHECK(spring_potential(0.0, kSpring) == 0.0);
  auto rng = testing::make_rng(23);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const double d = testing::uniform(rng, -2.0, 2.0);
    const double fd =
        (spring_potential(d + h, kSpring) - spring_potential(d - h, kSpring)) /
        (2 * h);
    CHECK(std::abs(-fd - spring_torque(d, kSpring)) <
          1e-6 * std::max(1.0, std::abs(spring_torque(d, kSpring))));
  }
}

TEST_CASE("deflections beyond the saturation limit are refused") {
  CHECK_THROWS_AS(spring_torque(2.51, kSpring), std::domain_error);
  CHECK_THROWS_AS(spring_torque(-2.51, kSpring), std::domain_error);
  CHECK_THROWS_AS(spring_stiffness(3.0, kSpring), std::domain_error);
  CHECK_NOTHROW(spring_torque(2.5, kSpring));

  SpringParams bad = kSpring;
  bad.K = 0.0;
  CHECK_THROWS_AS(spring_torque(0.1, bad), std::invalid_argument);
}

TEST_CASE("relaxed coupler stiffness at the center is isotropic") {
  const Eigen::Matrix2d S =
      coupler_stiffness({0.0, 0.0}, Eigen::Vector3d::Zero(), kSprings, kGeom);
  CHECK((S - 9.375 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("coupler stiffness scales linearly with the spring scale") {
  const MinimalCoords u{0.4, -0.3};
  const Eigen::Vector3d defl(0.2, -0.1, 0.5);
  const Eigen::Matrix2d S1 = coupler_stiffness(u, defl, kSprings, kGeom);
  std::array<SpringParams, 3> scaled = kSprings;
  for (auto& p : scaled) p.K *= 3.0;
  const Eigen::Matrix2d S3 = coupler_stiffness(u, defl, scaled, kGeom);
  CHECK((S3 - 3.0 * S1).cwiseAbs().maxCoeff() < 1e-12 * S3.norm());
}

TEST_CASE("coupler stiffness stays symmetric positive definite on a grid") {
  const double b = kGeom.u_max - 0.05;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const MinimalCoords u{-b + 2 * b * i / 9.0, -b + 2 * b * j / 9.0};
      for (double lam : {0.0, 200.0, -600.0}) {
        const Eigen::Vector3d defl =
            equilibrium_deflections(u, lam, kSprings, kGeom);
        const Eigen::Matrix2d S = coupler_stiffness(u, defl, kSprings, kGeom);
        CHECK(std::abs(S(0, 1) - S(1, 0)) < 1e-9 * S.norm());
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
        CHECK(es.eigenvalues()(0) > 0.0);
      }
    }
  }
}

TEST_CASE("stiffness eigenvalues grow with deflection magnitude") {
  const MinimalCoords u{0.2, 0.1};
  double prev_tr = 0.0;
  for (double s : {0.0, 0.4, 0.8, 1.2, 1.6}) {
    const Eigen::Vector3d defl(s, s, s);
    const double tr = coupler_stiffness(u, defl, kSprings, kGeom).trace();
    if (s > 0.0) CHECK(tr > prev_tr);
    prev_tr = tr;
  }
}

TEST_CASE("compliance inverts the stiffness") {
  const MinimalCoords u{0.3, 0.5};
  const Eigen::Vector3d defl(0.3, -0.2, 0.1);
  const Eigen::Matrix2d S = coupler_stiffness(u, defl, kSprings, kGeom);
  const Eigen::Matrix2d c = coupler_compliance(u, defl, kSprings, kGeom);
  CHECK((c * S - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  const Eigen::Matrix2d c0 =
      coupler_compliance({0.0, 0.0}, Eigen::Vector3d::Zero(), kSprings, kGeom);
  CHECK(std::abs(c0(0, 0) - c0(1, 1)) < 1e-9 * c0.norm());
  CHECK(std::abs(c0(0, 1)) < 1e-9 * c0.norm());
}

TEST_CASE("compliance shrinks as the preload grows") {
  const MinimalCoords u{0.0, 0.0};
  double prev = 1e9;
  for (double lam : {0.0, 100.0, 400.0, 1000.0}) {
    const Eigen::Vector3d defl = equilibrium_deflections(u, lam, kSprings, kGeom);
    const Eigen::Matrix2d c = coupler_compliance(u, defl, kSprings, kGeom);
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(c)
                           .eigenvalues()(1);
    CHECK(top < prev);
    prev = top;
  }
}

TEST_CASE("internal torques live in the actuation kernel") {
  CHECK(internal_torques(0.0, Eigen::Vector3d::Ones().normalized()).norm() == 0.0);

  auto rng = testing::make_rng(24);
  for (double lam : {-50.0, 10.0, 300.0}) {
    const MinimalCoords u{testing::uniform(rng, -0.8, 0.8),
                          testing::uniform(rng, -0.8, 0.8)};
    const Eigen::Vector3d N = nullspace_base(u, kGeom);
    const Eigen::Vector3d tau = internal_torques(lam, N);
    CHECK((actuation_jacobian(u, kGeom).transpose() * tau).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, std::abs(lam)));
  }

  Eigen::Vector3d not_unit(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(internal_torques(5.0, not_unit), std::invalid_argument);
}

TEST_CASE("preload deflections reproduce the requested torques") {
  auto rng = testing::make_rng(25);
  CHECK(equilibrium_deflections({0.1, -0.2}, 0.0, kSprings, kGeom).norm() == 0.0);

  for (int i = 0; i < 20; ++i) {
    const MinimalCoords u{testing::uniform(rng, -0.8, 0.8),
                          testing::uniform(rng, -0.8, 0.8)};
    const double lam = testing::uniform(rng, -800.0, 800.0);
    const Eigen::Vector3d N = nullspace_base(u, kGeom);
    const Eigen::Vector3d defl = equilibrium_deflections(u, lam, kSprings, kGeom);
    for (int k = 0; k < 3; ++k) {
      const double target = lam * N(k);
      CHECK(std::abs(spring_torque(defl(k), kSprings[k]) - target) <
            1e-10 * std::max(1.0, std::abs(target)));
    }
  }
}

TEST_CASE("preload deflections grow logarithmically") {
  const MinimalCoords u{0.0, 0.0};
  const double lam = 5.0e4;
  const Eigen::Vector3d d1 =
      equilibrium_deflections(u, lam, kSprings, kGeom);
  const Eigen::Vector3d d10 =
      equilibrium_deflections(u, 10.0 * lam, kSprings, kGeom);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(d10(k)) - std::abs(d1(k)) ==
          doctest::Approx(kSpring.delta0 * std::log(10.0)).epsilon(1e-3));
  }
}
