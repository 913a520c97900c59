#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace quadslam {

constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w <= 0.0) w += 2.0 * kPi;
  return w - kPi;
}

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Planar rigid pose. `theta` is kept wrapped by the operations below; direct
/// aggregate construction does not wrap.
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  static Pose2 identity() { return {}; }

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Matrix2d rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m.topLeftCorner<2, 2>() = rotation();
    m(0, 2) = x;
    m(1, 2) = y;
    return m;
  }

  /// Maps a point expressed in this pose's frame into the parent frame.
  Eigen::Vector2d transform(const Eigen::Vector2d& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
  }

  bool operator==(const Pose2&) const = default;
};

/// Body-frame velocity command.
struct Twist2 {
  double vx{0.0};
  double vy{0.0};
  double wz{0.0};

  bool operator==(const Twist2&) const = default;
  bool is_zero() const { return vx == 0.0 && vy == 0.0 && wz == 0.0; }
};

struct TwistLimits {
  double max_vx{0.3};
  double max_vy{0.3};
  double max_wz{1.0};

  bool contains(const Twist2& t) const {
    return std::abs(t.vx) <= max_vx && std::abs(t.vy) <= max_vy && std::abs(t.wz) <= max_wz;
  }
  Twist2 clamp(const Twist2& t) const;
};

/// a ∘ b, with b expressed in a's frame.
Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);
/// a⁻¹ ∘ b: pose of b seen from a.
Pose2 between(const Pose2& a, const Pose2& b);
Pose2 from_matrix(const Eigen::Matrix3d& m);

/// Angular difference a - b wrapped into (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

}  // namespace quadslam
