#include "quadslam/world/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace quadslam::world {

namespace {

constexpr double kContactClearance = 1e-9;

double gaussian(Rng& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

// Earliest fraction s ∈ [0,1] of the displacement `d` starting at `p` at which
// a disk of radius r touches the segment. Returns +inf when it never does.
double contact_fraction(const Eigen::Vector2d& p, const Eigen::Vector2d& d, const Segment& seg,
                        double r) {
  double best = std::numeric_limits<double>::infinity();
  const Eigen::Vector2d e = seg.b - seg.a;
  const double len = e.norm();
  const Eigen::Vector2d u = e / len;
  const Eigen::Vector2d n{-u.y(), u.x()};

  // Flat sides of the swept capsule.
  const double d0 = n.dot(p - seg.a);
  const double vn = n.dot(d);
  const double along0 = u.dot(p - seg.a);
  if (std::abs(d0) < r) {
    if (along0 >= 0.0 && along0 <= len && d0 * vn < 0.0) return 0.0;
  } else if (d0 * vn < 0.0) {
    const double s = (std::abs(d0) - r) / std::abs(vn);
    const double along = along0 + s * u.dot(d);
    if (along >= 0.0 && along <= len) best = std::min(best, s);
  }

  // Rounded caps at both endpoints.
  for (const auto& c : {seg.a, seg.b}) {
    const Eigen::Vector2d w = p - c;
    const double a = d.squaredNorm();
    const double b = 2.0 * w.dot(d);
    const double cc = w.squaredNorm() - r * r;
    if (cc < 0.0) {
      if (b < 0.0) return 0.0;
      continue;
    }
    if (a == 0.0) continue;
    const double disc = b * b - 4.0 * a * cc;
    if (disc < 0.0) continue;
    const double s = (-b - std::sqrt(disc)) / (2.0 * a);
    if (s >= 0.0) best = std::min(best, s);
  }
  return best;
}

}  // namespace

void NoiseModel::validate() const {
  for (double s : {odom_trans_sigma, odom_rot_sigma, lidar_sigma, imu_accel_sigma, imu_gyro_sigma})
    if (s < 0.0) throw std::invalid_argument("noise sigmas must be >= 0");
}

Pose2 step_true_pose(const Environment& env, const Pose2& pose, const Twist2& cmd, double dt,
                     double body_radius) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  const Eigen::Vector2d d{(c * cmd.vx - s * cmd.vy) * dt, (s * cmd.vx + c * cmd.vy) * dt};
  const Eigen::Vector2d p{pose.x, pose.y};

  double frac = 1.0;
  if (d.squaredNorm() > 0.0) {
    for (const auto& seg : env.walls()) frac = std::min(frac, contact_fraction(p, d, seg, body_radius));
    if (frac < 1.0) {
      // Back off so the disk never ends up overlapping the wall.
      const double back = kContactClearance / d.norm();
      frac = std::max(0.0, frac - back);
    }
  }
  const Eigen::Vector2d q = p + frac * d;
  return {q.x(), q.y(), wrap_angle(pose.theta + cmd.wz * dt)};
}

LaserScan simulate_scan(const Environment& env, const Pose2& true_pose, const LidarConfig& cfg,
                        const NoiseModel& noise, Rng& rng, double timestamp) {
  LaserScan scan;
  scan.timestamp = timestamp;
  scan.angle_min = cfg.angle_min;
  scan.angle_increment = cfg.angle_increment();
  scan.range_min = cfg.range_min;
  scan.range_max = cfg.range_max;
  scan.ranges.resize(static_cast<std::size_t>(cfg.beam_count));
  const Eigen::Vector2d origin{true_pose.x, true_pose.y};
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const auto hit = env.raycast(origin, true_pose.theta + scan.angle(i));
    if (!hit || *hit > cfg.range_max) {
      scan.ranges[i] = kNoReturn;
      continue;
    }
    const double r = *hit + gaussian(rng, noise.lidar_sigma);
    scan.ranges[i] = std::clamp(r, cfg.range_min, cfg.range_max);
  }
  return scan;
}

Pose2 measure_odometry(const Pose2& prev_true, const Pose2& cur_true, const NoiseModel& noise,
                       Rng& rng) {
  Pose2 d = between(prev_true, cur_true);
  const double trans = std::hypot(d.x, d.y);
  const double rot = std::abs(d.theta);
  d.x += gaussian(rng, noise.odom_trans_sigma * trans);
  d.y += gaussian(rng, noise.odom_trans_sigma * trans);
  d.theta = wrap_angle(d.theta + gaussian(rng, noise.odom_rot_sigma * rot));
  return d;
}

ImuSample simulate_imu(std::span<const Pose2> history, const NoiseModel& noise, double dt,
                       Rng& rng, double timestamp) {
  if (history.size() < 2) throw std::invalid_argument("simulate_imu needs at least two poses");
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_imu needs dt > 0");
  const std::size_t n = history.size();
  const Pose2& cur = history[n - 1];
  const Pose2& prev = history[n - 2];

  ImuSample imu;
  imu.timestamp = timestamp;
  imu.gyro = {0.0, 0.0, angle_diff(cur.theta, prev.theta) / dt};

  Eigen::Vector2d accel_world = Eigen::Vector2d::Zero();
  if (n >= 3) {
    const Pose2& prev2 = history[n - 3];
    const Eigen::Vector2d v1 = (cur.translation() - prev.translation()) / dt;
    const Eigen::Vector2d v0 = (prev.translation() - prev2.translation()) / dt;
    accel_world = (v1 - v0) / dt;
  }
  const Eigen::Vector2d accel_body = cur.rotation().transpose() * accel_world;
  imu.accel = {accel_body.x(), accel_body.y(), kGravity};

  for (int i = 0; i < 3; ++i) imu.accel[i] += gaussian(rng, noise.imu_accel_sigma);
  for (int i = 0; i < 3; ++i) imu.gyro[i] += gaussian(rng, noise.imu_gyro_sigma);
  return imu;
}

}  // namespace quadslam::world
