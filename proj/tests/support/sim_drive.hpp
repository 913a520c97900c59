#pragma once
// Minimal scripted drive used by backend tests: turn-then-drive through
// waypoints, one scan every `scan_every` steps.

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/world/environment.hpp"
#include "quadslam/world/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace testsim {

struct Frame {
  quadslam::Pose2 truth;
  quadslam::Pose2 odom_delta;  // since previous frame
  quadslam::LaserScan scan;
};

inline std::vector<Frame> drive(const quadslam::world::Environment& env, quadslam::Pose2 pose,
                                const std::vector<Eigen::Vector2d>& waypoints,
                                const quadslam::world::NoiseModel& noise,
                                const quadslam::LidarConfig& lidar = {}, int scan_every = 5,
                                double dt = 0.02) {
  using namespace quadslam;
  world::Rng rng(noise.rng_seed);
  std::vector<Frame> out;
  out.push_back({pose, Pose2::identity(), world::simulate_scan(env, pose, lidar, noise, rng, 0.0)});
  Pose2 last = pose;
  int step = 0;
  for (const auto& wp : waypoints) {
    for (int guard = 0; guard < 20000; ++guard) {
      const Eigen::Vector2d d = wp - pose.translation();
      if (d.norm() < 0.1) break;
      const double err = angle_diff(std::atan2(d.y(), d.x()), pose.theta);
      Twist2 cmd;
      if (std::abs(err) > 0.1)
        cmd.wz = std::clamp(2.0 * err, -0.8, 0.8);
      else
        cmd = {std::min(0.25, d.norm()), 0.0, std::clamp(2.0 * err, -0.8, 0.8)};
      pose = world::step_true_pose(env, pose, cmd, dt);
      if (++step % scan_every == 0) {
        const Pose2 delta = world::measure_odometry(last, pose, noise, rng);
        out.push_back({pose, delta, world::simulate_scan(env, pose, lidar, noise, rng, step * dt)});
        last = pose;
      }
    }
  }
  return out;
}

}  // namespace testsim
