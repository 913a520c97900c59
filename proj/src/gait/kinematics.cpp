#include "quadslam/gait/kinematics.hpp"

#include "quadslam/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quadslam::gait {

namespace {
constexpr double kReachSlack = 1e-12;
}

LegAngles leg_ik(double foot_forward, double foot_down, double l1, double l2) {
  const double r = std::hypot(foot_forward, foot_down);
  if (r > l1 + l2 + kReachSlack || r < std::abs(l1 - l2) - kReachSlack || r == 0.0)
    throw OutOfWorkspace("foot target at distance " + std::to_string(r) +
                         " m is outside the leg workspace");
  const double cos_knee = std::clamp((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double knee = std::acos(cos_knee);
  const double line = std::atan2(foot_forward, foot_down);
  const double offset = std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
  return {rad2deg(line - offset), rad2deg(knee)};
}

FootPosition leg_fk(const LegAngles& angles, double l1, double l2) {
  const double q1 = deg2rad(angles.thigh_deg);
  const double q12 = q1 + deg2rad(angles.shin_deg);
  return {l1 * std::sin(q1) + l2 * std::sin(q12), l1 * std::cos(q1) + l2 * std::cos(q12)};
}

}  // namespace quadslam::gait
