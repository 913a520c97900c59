#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/gait/gait.hpp"
#include "quadslam/gait/servo.hpp"
#include "quadslam/merge/map_merge.hpp"
#include "quadslam/slam/filter.hpp"
#include "quadslam/slam/graph_slam.hpp"
#include "quadslam/world/environment.hpp"
#include "quadslam/world/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadslam::app {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Backend { Filter, Graph };
enum class DriveMode { Scripted, Teleop };
enum class Transport { Inproc, Tcp };

std::string_view to_string(Backend b);
std::string_view to_string(DriveMode d);
std::string_view to_string(Transport t);

struct RobotConfig {
  std::string ns;
  Pose2 start;
  Backend backend{Backend::Graph};
  DriveMode drive{DriveMode::Scripted};
  std::vector<Eigen::Vector2d> waypoints;
};

/// Waypoint pursuit: turn in place until the heading error is small, then
/// drive with a proportional heading correction.
struct DriveConfig {
  double max_speed{0.25};        // m/s
  double max_turn{0.8};          // rad/s
  double heading_gain{2.0};
  double tolerance{0.1};         // m, waypoint reached
  double heading_tolerance{0.1}; // rad, turn-in-place above this
};

struct ScenarioConfig {
  std::string name{"scenario"};
  std::filesystem::path environment;
  std::filesystem::path calibration;  // empty: neutral table
  std::uint64_t seed{42};
  double duration{300.0};   // s of simulated time, upper bound
  double dt{0.02};          // s, world and gait step
  double map_period{1.0};   // s between map publications
  double merge_cadence{2.0};
  Transport transport{Transport::Inproc};
  std::uint16_t tcp_port{7447};  // 0: ephemeral
  std::uint16_t ws_port{7448};

  world::NoiseModel noise;
  LidarConfig lidar;
  world::BodyConfig body;
  gait::GaitParams gait;
  double madgwick_beta{0.1};
  double fusion_alpha{0.3};
  DriveConfig drive;
  slam::FilterConfig filter;
  slam::FilterMapper::Options filter_updates;
  slam::GraphConfig graph;
  merge::MergeConfig merge;

  std::vector<RobotConfig> robots;

  /// Steps of `dt` per lidar scan and per map period.
  int steps_per_scan() const;
  int steps_per_period() const;
  /// Throws ScenarioError on any violated invariant (including start poses
  /// against the loaded environment).
  void validate(const world::Environment& env) const;
};

/// Parses the key = value format; relative paths resolve against `base_dir`.
/// Throws ScenarioError with the line number on malformed or unknown keys.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Per-robot noise seed derived from the scenario seed.
std::uint64_t robot_seed(std::uint64_t scenario_seed, std::size_t robot_index, std::uint64_t stream);

}  // namespace quadslam::app
