#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadslam::world {

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;

  double length() const { return (b - a).norm(); }
};

struct Bounds {
  Eigen::Vector2d min{0.0, 0.0};
  Eigen::Vector2d max{0.0, 0.0};

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

/// Ground-truth world: a set of wall segments in meters.
class Environment {
 public:
  /// Throws EnvironmentError on an empty wall list or a zero-length segment.
  explicit Environment(std::vector<Segment> walls);

  const std::vector<Segment>& walls() const { return walls_; }
  const Bounds& bounds() const { return bounds_; }

  /// Distance along the ray from `origin` in direction `angle` to the nearest
  /// wall, or nullopt when the ray hits nothing.
  std::optional<double> raycast(const Eigen::Vector2d& origin, double angle) const;
  /// Smallest distance from `p` to any wall.
  double distance_to_walls(const Eigen::Vector2d& p) const;

 private:
  std::vector<Segment> walls_;
  Bounds bounds_;
};

/// Parses `x1 y1 x2 y2` lines; `#` starts a comment.
Environment parse_environment(const std::string& text);
Environment load_environment(const std::filesystem::path& path);

double point_segment_distance(const Eigen::Vector2d& p, const Segment& s);

}  // namespace quadslam::world
