#pragma once

#include <cmath>
#include <Eigen/Core>

namespace pansu {

// Forward-mode dual number a + b·ε with ε² = 0. Used to take exact
// directional derivatives of the chart connection.
struct Dual {
  double a = 0.0;
  double b = 0.0;

  Dual() = default;
  Dual(double v) : a(v) {}
  Dual(double v, double d) : a(v), b(d) {}

  Dual& operator+=(const Dual& o) { a += o.a; b += o.b; return *this; }
  Dual& operator-=(const Dual& o) { a -= o.a; b -= o.b; return *this; }
  Dual& operator*=(const Dual& o) { b = b * o.a + a * o.b; a *= o.a; return *this; }
  Dual& operator/=(const Dual& o) {
    b = (b * o.a - a * o.b) / (o.a * o.a);
    a /= o.a;
    return *this;
  }
};

inline Dual operator-(const Dual& x) { return {-x.a, -x.b}; }
inline Dual operator+(Dual x, const Dual& y) { return x += y; }
inline Dual operator-(Dual x, const Dual& y) { return x -= y; }
inline Dual operator*(Dual x, const Dual& y) { return x *= y; }
inline Dual operator/(Dual x, const Dual& y) { return x /= y; }
inline bool operator==(const Dual& x, const Dual& y) { return x.a == y.a && x.b == y.b; }
inline bool operator!=(const Dual& x, const Dual& y) { return !(x == y); }
inline bool operator<(const Dual& x, const Dual& y) { return x.a < y.a; }

inline Dual sqrt(const Dual& x) {
  double r = std::sqrt(x.a);
  return {r, x.b / (2.0 * r)};
}
inline Dual sin(const Dual& x) { return {std::sin(x.a), x.b * std::cos(x.a)}; }
inline Dual cos(const Dual& x) { return {std::cos(x.a), -x.b * std::sin(x.a)}; }

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.a; }

}  // namespace pansu

namespace Eigen {
template <>
struct NumTraits<pansu::Dual> : NumTraits<double> {
  typedef pansu::Dual Real;
  typedef pansu::Dual NonInteger;
  typedef pansu::Dual Nested;
  typedef pansu::Dual Literal;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 4
  };
};
}  // namespace Eigen
