#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dislo {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

constexpr double kPi = std::numbers::pi;

// Base for every recoverable failure raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Mat2 rotation(double phi) {
  Mat2 R;
  R << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  return R;
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Vec2 perp(const Vec2& a) { return Vec2(-a.y(), a.x()); }

inline double angle_of(const Vec2& a) { return std::atan2(a.y(), a.x()); }

// Maps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

// Counter-clockwise angle from u to v in [0, 2pi).
inline double ccw_angle(const Vec2& u, const Vec2& v) {
  double a = std::atan2(cross(u, v), u.dot(v));
  return a < 0 ? a + 2.0 * kPi : a;
}

inline Mat2 cofactor(const Mat2& A) {
  Mat2 C;
  C << A(1, 1), -A(1, 0), -A(0, 1), A(0, 0);
  return C;
}

}  // namespace dislo
