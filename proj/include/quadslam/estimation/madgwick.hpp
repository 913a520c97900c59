#pragma once

#include "quadslam/world/simulator.hpp"

#include <cmath>

namespace quadslam::estimation {

/// Unit quaternion, Hamilton convention, body → earth.
struct Quaternion {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quaternion normalized() const;
  static Quaternion from_axis_angle(double ax, double ay, double az, double angle);
  /// ZYX yaw.
  double yaw() const;
  /// Angle between the body z axis and earth z axis.
  double tilt() const;
};

Quaternion multiply(const Quaternion& a, const Quaternion& b);

/// One IMU-only Madgwick step: gyro integration corrected by a normalized
/// gradient step of size beta toward gravity alignment. A zero accel vector
/// skips the correction.
Quaternion madgwick_update(const Quaternion& q, const world::ImuSample& imu, double beta, double dt);

class MadgwickFilter {
 public:
  explicit MadgwickFilter(double beta = 0.1) : beta_(beta) {}

  const Quaternion& update(const world::ImuSample& imu, double dt) {
    q_ = madgwick_update(q_, imu, beta_, dt);
    return q_;
  }
  const Quaternion& orientation() const { return q_; }
  double yaw() const { return q_.yaw(); }

 private:
  double beta_;
  Quaternion q_{};
};

}  // namespace quadslam::estimation
