#include "quadslam/estimation/madgwick.hpp"

#include <algorithm>
#include <stdexcept>

namespace quadslam::estimation {

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::from_axis_angle(double ax, double ay, double az, double angle) {
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  const double s = std::sin(angle / 2.0) / n;
  return {std::cos(angle / 2.0), ax * s, ay * s, az * s};
}

double Quaternion::yaw() const {
  return std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

double Quaternion::tilt() const {
  // z component of the body z axis expressed in the earth frame.
  const double c = 1.0 - 2.0 * (x * x + y * y);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion madgwick_update(const Quaternion& q, const world::ImuSample& imu, double beta, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("madgwick: dt must be > 0");
  if (beta < 0.0) throw std::invalid_argument("madgwick: beta must be >= 0");

  const Quaternion omega{0.0, imu.gyro.x(), imu.gyro.y(), imu.gyro.z()};
  const Quaternion qd = multiply(q, omega);
  double dw = 0.5 * qd.w, dx = 0.5 * qd.x, dy = 0.5 * qd.y, dz = 0.5 * qd.z;

  const double an = imu.accel.norm();
  if (an > 0.0 && beta > 0.0) {
    const double ax = imu.accel.x() / an, ay = imu.accel.y() / an, az = imu.accel.z() / an;
    // Objective: predicted gravity in the body frame minus measured direction.
    const double f0 = 2.0 * (q.x * q.z - q.w * q.y) - ax;
    const double f1 = 2.0 * (q.w * q.x + q.y * q.z) - ay;
    const double f2 = 2.0 * (0.5 - q.x * q.x - q.y * q.y) - az;
    // Gradient Jᵀf.
    double sw = -2.0 * q.y * f0 + 2.0 * q.x * f1;
    double sx = 2.0 * q.z * f0 + 2.0 * q.w * f1 - 4.0 * q.x * f2;
    double sy = -2.0 * q.w * f0 + 2.0 * q.z * f1 - 4.0 * q.y * f2;
    double sz = 2.0 * q.x * f0 + 2.0 * q.y * f1;
    const double sn = std::sqrt(sw * sw + sx * sx + sy * sy + sz * sz);
    if (sn > 0.0) {
      dw -= beta * sw / sn;
      dx -= beta * sx / sn;
      dy -= beta * sy / sn;
      dz -= beta * sz / sn;
    }
  }

  return Quaternion{q.w + dw * dt, q.x + dx * dt, q.y + dy * dt, q.z + dz * dt}.normalized();
}

}  // namespace quadslam::estimation
