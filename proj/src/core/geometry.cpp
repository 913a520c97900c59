#include "quadslam/core/geometry.hpp"

#include <algorithm>

namespace quadslam {

Twist2 TwistLimits::clamp(const Twist2& t) const {
  return {std::clamp(t.vx, -max_vx, max_vx), std::clamp(t.vy, -max_vy, max_vy),
          std::clamp(t.wz, -max_wz, max_wz)};
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, wrap_angle(a.theta + b.theta)};
}

Pose2 inverse(const Pose2& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return {-c * p.x - s * p.y, s * p.x - c * p.y, wrap_angle(-p.theta)};
}

Pose2 between(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  const double dx = b.x - a.x, dy = b.y - a.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(b.theta - a.theta)};
}

Pose2 from_matrix(const Eigen::Matrix3d& m) {
  return {m(0, 2), m(1, 2), wrap_angle(std::atan2(m(1, 0), m(0, 0)))};
}

}  // namespace quadslam
