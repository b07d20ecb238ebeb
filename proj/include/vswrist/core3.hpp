#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "vswrist/dual.hpp"

namespace vswrist {

// Scalar-templated 3-space primitives. The kinematic chain is written once
// against these and instantiated with double for values and Dual<...> for
// derivatives, so there is exactly one definition of the geometry.

template <typename T>
struct Vec3T {
  T x{}, y{}, z{};

  T& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  const T& operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3T operator+(const Vec3T& a, const Vec3T& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Vec3T operator-(const Vec3T& a, const Vec3T& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Vec3T operator*(const T& s, const Vec3T& v) {
    return {s * v.x, s * v.y, s * v.z};
  }
  friend Vec3T operator-(const Vec3T& v) { return {-v.x, -v.y, -v.z}; }
};

template <typename T>
T dot(const Vec3T<T>& a, const Vec3T<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
struct Mat3T {
  // Row-major.
  std::array<T, 9> m{};

  T& operator()(std::size_t r, std::size_t c) { return m[3 * r + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return m[3 * r + c]; }

  static Mat3T identity() {
    Mat3T out;
    out.m = {T(1), T(0), T(0), T(0), T(1), T(0), T(0), T(0), T(1)};
    return out;
  }

  friend Mat3T operator*(const Mat3T& a, const Mat3T& b) {
    Mat3T out;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    return out;
  }
  friend Vec3T<T> operator*(const Mat3T& a, const Vec3T<T>& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
  }
  friend Mat3T operator+(const Mat3T& a, const Mat3T& b) {
    Mat3T out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] + b.m[i];
    return out;
  }
  friend Mat3T operator-(const Mat3T& a, const Mat3T& b) {
    Mat3T out;
    for (std::size_t i = 0; i < 9; ++i) out.m[i] = a.m[i] - b.m[i];
    return out;
  }

  Mat3T transposed() const {
    Mat3T out;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
    return out;
  }
};

/// skew(v) * w == cross(v, w)
template <typename T>
Mat3T<T> skew(const Vec3T<T>& v) {
  Mat3T<T> out;
  out.m = {T(0), -v.z, v.y, v.z, T(0), -v.x, -v.y, v.x, T(0)};
  return out;
}

template <typename T>
Vec3T<T> vee(const Mat3T<T>& s) {
  return {s(2, 1), s(0, 2), s(1, 0)};
}

/// Rigid transform as rotation + translation; the projective row is implicit.
template <typename T>
struct Tf3 {
  Mat3T<T> R = Mat3T<T>::identity();
  Vec3T<T> p{};

  friend Tf3 operator*(const Tf3& a, const Tf3& b) {
    return {a.R * b.R, a.R * b.p + a.p};
  }
  Vec3T<T> apply(const Vec3T<T>& v) const { return R * v + p; }
  Tf3 inverse() const {
    Mat3T<T> Rt = R.transposed();
    return {Rt, -(Rt * p)};
  }
};

template <typename T>
Tf3<T> rot_x(const T& a) {
  using vswrist::cos;
  using vswrist::sin;
  using std::cos;
  using std::sin;
  const T c = cos(a), s = sin(a);
  Tf3<T> out;
  out.R.m = {T(1), T(0), T(0), T(0), c, -s, T(0), s, c};
  return out;
}

template <typename T>
Tf3<T> rot_y(const T& a) {
  using vswrist::cos;
  using vswrist::sin;
  using std::cos;
  using std::sin;
  const T c = cos(a), s = sin(a);
  Tf3<T> out;
  out.R.m = {c, T(0), s, T(0), T(1), T(0), -s, T(0), c};
  return out;
}

template <typename T>
Tf3<T> rot_z(const T& a) {
  using vswrist::cos;
  using vswrist::sin;
  using std::cos;
  using std::sin;
  const T c = cos(a), s = sin(a);
  Tf3<T> out;
  out.R.m = {c, -s, T(0), s, c, T(0), T(0), T(0), T(1)};
  return out;
}

template <typename T>
Tf3<T> trans_x(const T& v) {
  Tf3<T> out;
  out.p = {v, T(0), T(0)};
  return out;
}
template <typename T>
Tf3<T> trans_y(const T& v) {
  Tf3<T> out;
  out.p = {T(0), v, T(0)};
  return out;
}
template <typename T>
Tf3<T> trans_z(const T& v) {
  Tf3<T> out;
  out.p = {T(0), T(0), v};
  return out;
}

}  // namespace vswrist
