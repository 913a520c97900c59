#include "quadslam/estimation/odometry.hpp"

#include <stdexcept>

namespace quadslam::estimation {

double blend_angles(double a, double b, double alpha) {
  if (alpha == 0.0) return wrap_angle(a);
  if (alpha == 1.0) return wrap_angle(b);
  return wrap_angle(a + alpha * angle_diff(b, a));
}

OdomState fuse_odometry(const OdomState& state, const Pose2& odom_delta, double imu_yaw,
                        double alpha, double timestamp) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fusion alpha must lie in [0,1]");
  OdomState next;
  next.pose = compose(state.pose, odom_delta);
  next.pose.theta = blend_angles(next.pose.theta, imu_yaw, alpha);
  next.timestamp = timestamp;
  return next;
}

}  // namespace quadslam::estimation
