#pragma once

// Forward-mode scalar types used to differentiate jet propagation with
// respect to the network parameters along a single direction.

#include <cmath>

namespace tangent_kit {

/// Value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

  constexpr Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
};

constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
constexpr Dual operator+(Dual a, double b) { return a += Dual(b); }
constexpr Dual operator+(double a, Dual b) { return b += Dual(a); }
constexpr Dual operator-(Dual a, double b) { return a -= Dual(b); }
constexpr Dual operator-(double a, const Dual& b) { return Dual(a) - b; }
constexpr Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
constexpr Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }

inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}

/// Value, first and second derivative along one direction, truncated at
/// second order. Products follow Leibniz: (fg)'' = f''g + 2f'g' + fg''.
struct Taylor2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  constexpr Taylor2() = default;
  constexpr Taylor2(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Taylor2(double value, double first, double second) : v(value), d1(first), d2(second) {}

  constexpr Taylor2& operator+=(const Taylor2& o) {
    v += o.v;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
  constexpr Taylor2& operator-=(const Taylor2& o) {
    v -= o.v;
    d1 -= o.d1;
    d2 -= o.d2;
    return *this;
  }
  constexpr Taylor2& operator*=(const Taylor2& o) {
    const double nd2 = d2 * o.v + 2.0 * d1 * o.d1 + v * o.d2;
    const double nd1 = d1 * o.v + v * o.d1;
    v *= o.v;
    d1 = nd1;
    d2 = nd2;
    return *this;
  }
};

constexpr Taylor2 operator+(Taylor2 a, const Taylor2& b) { return a += b; }
constexpr Taylor2 operator-(Taylor2 a, const Taylor2& b) { return a -= b; }
constexpr Taylor2 operator*(Taylor2 a, const Taylor2& b) { return a *= b; }
constexpr Taylor2 operator-(const Taylor2& a) { return {-a.v, -a.d1, -a.d2}; }
constexpr Taylor2 operator+(Taylor2 a, double b) { return a += Taylor2(b); }
constexpr Taylor2 operator+(double a, Taylor2 b) { return b += Taylor2(a); }
constexpr Taylor2 operator-(Taylor2 a, double b) { return a -= Taylor2(b); }
constexpr Taylor2 operator-(double a, const Taylor2& b) { return Taylor2(a) - b; }
constexpr Taylor2 operator*(const Taylor2& a, double b) { return {a.v * b, a.d1 * b, a.d2 * b}; }
constexpr Taylor2 operator*(double a, const Taylor2& b) { return {a * b.v, a * b.d1, a * b.d2}; }

inline Taylor2 tanh(const Taylor2& a) {
  const double t = std::tanh(a.v);
  const double s1 = 1.0 - t * t;
  const double s2 = -2.0 * t * s1;
  return {t, s1 * a.d1, s2 * a.d1 * a.d1 + s1 * a.d2};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }
inline double value_of(const Taylor2& x) { return x.v; }

}  // namespace tangent_kit
