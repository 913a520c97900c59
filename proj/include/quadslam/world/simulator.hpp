#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/world/environment.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>

namespace quadslam::world {

inline constexpr double kGravity = 9.81;

struct ImuSample {
  double timestamp{0.0};
  Eigen::Vector3d accel{0.0, 0.0, kGravity};  // body frame, m/s^2
  Eigen::Vector3d gyro{Eigen::Vector3d::Zero()};  // body frame, rad/s
};

/// Sensor noise. Odometry sigmas scale with the magnitude of each measured
/// increment; all sigmas are standard deviations.
struct NoiseModel {
  double odom_trans_sigma{0.05};  // m per m traveled
  double odom_rot_sigma{0.05};    // rad per rad turned
  double lidar_sigma{0.01};       // m
  double imu_accel_sigma{0.05};   // m/s^2
  double imu_gyro_sigma{0.005};   // rad/s
  std::uint64_t rng_seed{42};

  static NoiseModel zero() { return {0, 0, 0, 0, 0, 42}; }
  void validate() const;
};

using Rng = std::mt19937_64;

struct BodyConfig {
  double radius{0.15};
  TwistLimits limits{};
};

/// Euler step of body-frame velocities. Translation stops at first contact
/// of the body disk with any wall; rotation is always applied.
Pose2 step_true_pose(const Environment& env, const Pose2& pose, const Twist2& cmd, double dt,
                     double body_radius = 0.15);

/// Raycast lidar with additive Gaussian range noise (sigma = noise.lidar_sigma).
LaserScan simulate_scan(const Environment& env, const Pose2& true_pose, const LidarConfig& cfg,
                   const NoiseModel& noise, Rng& rng, double timestamp = 0.0);

/// Body-frame relative motion prev⁻¹ ∘ cur with magnitude-scaled noise.
Pose2 measure_odometry(const Pose2& prev_true, const Pose2& cur_true, const NoiseModel& noise,
                       Rng& rng);

/// IMU sample from the last entries of a fixed-rate pose history (oldest
/// first). Needs ≥2 entries; planar acceleration needs 3.
ImuSample simulate_imu(std::span<const Pose2> history, const NoiseModel& noise, double dt,
                       Rng& rng, double timestamp = 0.0);

}  // namespace quadslam::world
