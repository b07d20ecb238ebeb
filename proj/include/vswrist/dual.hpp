#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace vswrist {

/// Forward-mode dual number carrying N derivative lanes alongside the value.
/// The scalar-templated kinematics core runs on these to get exact first
/// derivatives; plain double runs the same code paths for value-only work.
template <typename T, std::size_t N>
struct Dual {
  T val{};
  std::array<T, N> der{};

  Dual() = default;
  Dual(T v) : val(v) {}  // NOLINT: implicit promotion from scalar is the point
  Dual(T v, const std::array<T, N>& d) : val(v), der(d) {}

  static Dual seeded(T v, std::size_t lane) {
    Dual out(v);
    out.der[lane] = T(1);
    return out;
  }

  Dual& operator+=(const Dual& o) {
    val += o.val;
    for (std::size_t i = 0; i < N; ++i) der[i] += o.der[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    for (std::size_t i = 0; i < N; ++i) der[i] -= o.der[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator-(const Dual& a) {
    Dual out(-a.val);
    for (std::size_t i = 0; i < N; ++i) out.der[i] = -a.der[i];
    return out;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual out(a.val * b.val);
    for (std::size_t i = 0; i < N; ++i)
      out.der[i] = a.der[i] * b.val + a.val * b.der[i];
    return out;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual out(a.val / b.val);
    const T inv2 = T(1) / (b.val * b.val);
    for (std::size_t i = 0; i < N; ++i)
      out.der[i] = (a.der[i] * b.val - a.val * b.der[i]) * inv2;
    return out;
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.val <= b.val; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.val >= b.val; }
};

template <typename T, std::size_t N>
Dual<T, N> chain_rule(T f, T df, const Dual<T, N>& x) {
  Dual<T, N> out(f);
  for (std::size_t i = 0; i < N; ++i) out.der[i] = df * x.der[i];
  return out;
}

template <typename T, std::size_t N>
Dual<T, N> sin(const Dual<T, N>& x) {
  return chain_rule(std::sin(x.val), std::cos(x.val), x);
}
template <typename T, std::size_t N>
Dual<T, N> cos(const Dual<T, N>& x) {
  return chain_rule(std::cos(x.val), -std::sin(x.val), x);
}
template <typename T, std::size_t N>
Dual<T, N> sqrt(const Dual<T, N>& x) {
  const T r = std::sqrt(x.val);
  return chain_rule(r, T(0.5) / r, x);
}
template <typename T, std::size_t N>
Dual<T, N> sinh(const Dual<T, N>& x) {
  return chain_rule(std::sinh(x.val), std::cosh(x.val), x);
}
template <typename T, std::size_t N>
Dual<T, N> cosh(const Dual<T, N>& x) {
  return chain_rule(std::cosh(x.val), std::sinh(x.val), x);
}
template <typename T, std::size_t N>
Dual<T, N> asinh(const Dual<T, N>& x) {
  return chain_rule(std::asinh(x.val), T(1) / std::sqrt(x.val * x.val + T(1)), x);
}
template <typename T, std::size_t N>
Dual<T, N> exp(const Dual<T, N>& x) {
  const T e = std::exp(x.val);
  return chain_rule(e, e, x);
}

/// acos with the argument clamped to [-1, 1]; the derivative uses the
/// clamped value, so iterates slightly off the constraint manifold stay
/// finite instead of throwing mid-solve.
template <typename T, std::size_t N>
Dual<T, N> acos_clamped(const Dual<T, N>& x) {
  T c = x.val;
  if (c > T(1)) c = T(1);
  if (c < T(-1)) c = T(-1);
  const T denom = std::sqrt(std::max(T(1) - c * c, T(1e-14)));
  return chain_rule(std::acos(c), T(-1) / denom, x);
}
inline double acos_clamped(double x) {
  if (x > 1.0) x = 1.0;
  if (x < -1.0) x = -1.0;
  return std::acos(x);
}

template <typename T, std::size_t N>
Dual<T, N> atan2(const Dual<T, N>& y, const Dual<T, N>& x) {
  Dual<T, N> out(std::atan2(y.val, x.val));
  const T inv = T(1) / (x.val * x.val + y.val * y.val);
  for (std::size_t i = 0; i < N; ++i)
    out.der[i] = (x.val * y.der[i] - y.val * x.der[i]) * inv;
  return out;
}

template <typename T, std::size_t N>
T value(const Dual<T, N>& x) {
  return x.val;
}
inline double value(double x) { return x; }

}  // namespace vswrist
