#pragma once

#include "quadslam/core/geometry.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace quadslam {

/// Range value reported for beams without a return.
inline constexpr double kNoReturn = std::numeric_limits<double>::infinity();

inline bool has_return(double range) { return std::isfinite(range); }

struct LidarConfig {
  int beam_count{360};
  double angle_min{-kPi};
  double angle_max{kPi - 2.0 * kPi / 360.0};
  double range_min{0.1};
  double range_max{12.0};
  double range_noise_sigma{0.01};
  double scan_rate{10.0};

  double angle_increment() const { return (angle_max - angle_min) / (beam_count - 1); }
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// One lidar revolution. Ranges use kNoReturn as the no-return sentinel.
struct LaserScan {
  double timestamp{0.0};
  double angle_min{0.0};
  double angle_increment{0.0};
  double range_min{0.0};
  double range_max{0.0};
  std::vector<double> ranges;

  double angle(std::size_t i) const { return angle_min + static_cast<double>(i) * angle_increment; }
  std::size_t valid_count() const;
  /// Endpoint of beam i in the sensor frame. Requires has_return(ranges[i]).
  Eigen::Vector2d endpoint(std::size_t i) const {
    const double a = angle(i);
    return {ranges[i] * std::cos(a), ranges[i] * std::sin(a)};
  }
  /// All finite endpoints, in the sensor frame.
  std::vector<Eigen::Vector2d> points() const;

  bool operator==(const LaserScan&) const = default;
};

}  // namespace quadslam
