#include "vswrist/elasticity.hpp"

#include <cmath>
#include <stdexcept>

namespace vswrist {

namespace {

void validate(const SpringParams& p) {
  if (!(p.K > 0.0) || !(p.delta0 > 0.0) || !(p.delta_max > 0.0)) {
    throw std::invalid_argument("spring parameters must be positive");
  }
}

void check_deflection(double delta, const SpringParams& p) {
  validate(p);
  if (!std::isfinite(delta)) throw std::invalid_argument("non-finite deflection");
  if (std::abs(delta) > p.delta_max) {
    throw std::domain_error("spring deflection beyond saturation limit");
  }
}

}  // namespace

double spring_torque(double delta, const SpringParams& p) {
  check_deflection(delta, p);
  return -2.0 * p.K * std::sinh(delta / p.delta0);
}

double spring_stiffness(double delta, const SpringParams& p) {
  check_deflection(delta, p);
  return 2.0 * (p.K / p.delta0) * std::cosh(delta / p.delta0);
}

double spring_potential(double delta, const SpringParams& p) {
  check_deflection(delta, p);
  return 2.0 * p.K * p.delta0 * (std::cosh(delta / p.delta0) - 1.0);
}

Eigen::Matrix2d coupler_stiffness(const MinimalCoords& u,
                                  const Eigen::Vector3d& deflections,
                                  const std::array<SpringParams, 3>& params,
                                  const WristGeometry& geom,
                                  const Eigen::Vector4d* seed) {
  const Eigen::Matrix<double, 3, 2> Ja = actuation_jacobian(u, geom, seed);
  Eigen::Vector3d sigma;
  for (int k = 0; k < 3; ++k) {
    sigma(k) = spring_stiffness(deflections(k), params[k]);
  }
  return Ja.transpose() * sigma.asDiagonal() * Ja;
}

Eigen::Matrix2d coupler_compliance(const MinimalCoords& u,
                                   const Eigen::Vector3d& deflections,
                                   const std::array<SpringParams, 3>& params,
                                   const WristGeometry& geom,
                                   const Eigen::Vector4d* seed) {
  const Eigen::Matrix2d sigma_c =
      coupler_stiffness(u, deflections, params, geom, seed);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sigma_c);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw std::runtime_error("coupler stiffness is numerically singular");
  }
  return sigma_c.inverse();
}

Eigen::Vector3d internal_torques(double lambda, const Eigen::Vector3d& N) {
  if (!std::isfinite(lambda) || !N.allFinite()) {
    throw std::invalid_argument("non-finite preload arguments");
  }
  if (std::abs(N.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("kernel direction must be unit length");
  }
  return lambda * N;
}

Eigen::Vector3d equilibrium_deflections(const MinimalCoords& u, double lambda,
                                        const std::array<SpringParams, 3>& params,
                                        const WristGeometry& geom,
                                        const Eigen::Vector4d* seed) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("non-finite preload");
  const Eigen::Vector3d N = nullspace_base(u, geom, seed);
  Eigen::Vector3d delta;
  for (int k = 0; k < 3; ++k) {
    validate(params[k]);
    const double target = lambda * N(k);
    delta(k) = -params[k].delta0 * std::asinh(target / (2.0 * params[k].K));
    // Deflections must reproduce the requested torques through the raw spring
    // law (evaluated unguarded: the saturation limit is a separate concern).
    const double realized = -2.0 * params[k].K * std::sinh(delta(k) / params[k].delta0);
    if (std::abs(realized - target) > 1e-10 * std::max(1.0, std::abs(target))) {
      throw std::runtime_error("preload deflection failed its consistency check");
    }
  }
  return delta;
}

}  // namespace vswrist
