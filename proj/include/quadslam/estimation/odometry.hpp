#pragma once

#include "quadslam/core/geometry.hpp"

namespace quadslam::estimation {

struct OdomState {
  Pose2 pose{};
  double timestamp{0.0};
};

/// SE(2) composition a ∘ b (b expressed in a's frame).
inline Pose2 compose_se2(const Pose2& a, const Pose2& b) { return compose(a, b); }

/// Wrap-aware blend: a + alpha * (b - a) on the circle. alpha 0 and 1 return
/// the (wrapped) endpoints exactly.
double blend_angles(double a, double b, double alpha);

/// Composes the odometry increment, then pulls yaw toward the IMU yaw with
/// weight alpha ∈ [0, 1].
OdomState fuse_odometry(const OdomState& state, const Pose2& odom_delta, double imu_yaw,
                        double alpha, double timestamp);

}  // namespace quadslam::estimation
