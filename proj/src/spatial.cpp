#include "vswrist/spatial.hpp"

#include <cmath>
#include <stdexcept>

namespace vswrist {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("non-finite ") + what);
  }
}

}  // namespace

double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  if (a <= -M_PI) a = M_PI;  // remainder returns [-pi, pi]; fold the open end
  return a;
}

HomogeneousTransform elementary_transform(Axis axis, TransformKind kind, double p) {
  require_finite(p, "transform parameter");
  HomogeneousTransform out;
  if (kind == TransformKind::translation) {
    out.translation(static_cast<int>(axis)) = p;
    return out;
  }
  const double c = std::cos(p), s = std::sin(p);
  switch (axis) {
    case Axis::x:
      out.rotation << 1, 0, 0, 0, c, -s, 0, s, c;
      break;
    case Axis::y:
      out.rotation << c, 0, s, 0, 1, 0, -s, 0, c;
      break;
    case Axis::z:
      out.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
      break;
  }
  return out;
}

HomogeneousTransform pose_to_transform(const PoseVector& x) {
  require_finite(x.alpha_x, "alpha_x");
  require_finite(x.alpha_y, "alpha_y");
  require_finite(x.alpha_z, "alpha_z");
  require_finite(x.x_c, "x_c");
  require_finite(x.y_c, "y_c");
  require_finite(x.z_c, "z_c");
  return from_tf3(
      pose_to_tf3(x.alpha_x, x.alpha_y, x.alpha_z, x.x_c, x.y_c, x.z_c));
}

PoseVector transform_to_pose(const HomogeneousTransform& T) {
  const Eigen::Matrix3d& R = T.rotation;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) require_finite(R(r, c), "rotation entry");
  const double sy = -R(2, 0);
  const double cy = std::sqrt(R(0, 0) * R(0, 0) + R(1, 0) * R(1, 0));
  if (cy <= 1e-8) {
    throw std::domain_error(
        "degenerate orientation: pitch within 1e-8 of gimbal lock");
  }
  PoseVector x;
  x.alpha_y = std::asin(std::clamp(sy, -1.0, 1.0));
  x.alpha_z = normalize_angle(std::atan2(R(1, 0), R(0, 0)));
  x.alpha_x = normalize_angle(std::atan2(R(2, 1), R(2, 2)));
  x.x_c = T.translation(0);
  x.y_c = T.translation(1);
  x.z_c = T.translation(2);
  require_finite(x.x_c, "x_c");
  require_finite(x.y_c, "y_c");
  require_finite(x.z_c, "z_c");
  return x;
}

HomogeneousTransform dh_transform(const DHRow& row, double q) {
  require_finite(row.theta, "theta");
  require_finite(row.d, "d");
  require_finite(row.a, "a");
  require_finite(row.alpha, "alpha");
  require_finite(q, "q");
  return elementary_transform(Axis::z, TransformKind::rotation, row.theta + q) *
         elementary_transform(Axis::z, TransformKind::translation, row.d) *
         elementary_transform(Axis::x, TransformKind::rotation, row.alpha) *
         elementary_transform(Axis::x, TransformKind::translation, row.a);
}

}  // namespace vswrist
