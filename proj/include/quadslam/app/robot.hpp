#pragma once

#include "quadslam/app/metrics.hpp"
#include "quadslam/app/scenario.hpp"
#include "quadslam/estimation/madgwick.hpp"
#include "quadslam/estimation/odometry.hpp"
#include "quadslam/gait/ll_link.hpp"
#include "quadslam/net/link.hpp"
#include "quadslam/slam/filter.hpp"
#include "quadslam/slam/graph_slam.hpp"
#include "quadslam/slam/scan_queue.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

namespace quadslam::app {

/// Turn-then-drive pursuit of a waypoint list on the true pose.
class WaypointDriver {
 public:
  WaypointDriver(std::vector<Eigen::Vector2d> waypoints, DriveConfig cfg);
  Twist2 command(const Pose2& pose);
  bool done() const { return next_ >= waypoints_.size(); }
  std::size_t reached() const { return next_; }

 private:
  std::vector<Eigen::Vector2d> waypoints_;
  DriveConfig cfg_;
  std::size_t next_{0};
};

struct RobotOutcome {
  std::vector<StampedPose> truth;     // world frame, one per scan
  std::vector<StampedPose> odometry;  // robot start frame, one per scan
  std::vector<StampedPose> estimate;  // robot start frame, SLAM output
  mapping::OccupancyGrid map;         // robot start frame
  std::optional<slam::PoseGraph> graph;
  std::size_t scans{0};
  std::size_t slam_updates{0};  // graph nodes or filter updates
  int loop_closures{0};
  std::uint64_t ll_accepted{0};
  std::uint64_t ll_rejected{0};
  bool reached_goal{false};
};

/// One simulated robot: world-sim → gait-ll → state-estimation → SLAM
/// backend → hub. advance() runs the HL pipeline on the calling thread; the
/// LL consumer and (graph backend) the mapping worker run on their own.
class RobotPipeline {
 public:
  /// `resume` continues a saved graph: scans up to its clock are simulated
  /// but not fed to the backend again.
  RobotPipeline(const ScenarioConfig& scenario, const RobotConfig& robot, std::size_t index,
                const world::Environment& env, const gait::CalibrationTable& calibration, net::HubLink& link,
                std::optional<slam::PoseGraph> resume = std::nullopt);
  ~RobotPipeline();
  RobotPipeline(const RobotPipeline&) = delete;
  RobotPipeline& operator=(const RobotPipeline&) = delete;

  /// Steps the world until the step counter reaches `step`.
  void advance(std::int64_t step);
  /// Waits for the backend to catch up, then publishes <ns>/map.
  void publish_map();
  /// Current graph after the backend caught up. Graph backend only.
  slam::PoseGraph snapshot_graph();
  /// Stops the LL consumer and the worker and runs the final optimization.
  RobotOutcome finish();

  const RobotConfig& config() const { return robot_; }
  std::int64_t step() const { return step_; }
  /// Scripted drive with every waypoint reached.
  bool done() const { return robot_.drive == DriveMode::Scripted && driver_.done(); }

 private:
  Twist2 next_command();
  void on_scan(double t);
  void feed(const Pose2& delta, LaserScan scan);
  void wait_idle();
  void worker();
  mapping::OccupancyGrid current_map();
  Pose2 estimate_now();

  const ScenarioConfig& sc_;
  RobotConfig robot_;
  const world::Environment& env_;
  gait::CalibrationTable calibration_;
  net::HubLink& link_;
  world::NoiseModel noise_;
  world::Rng rng_;

  std::int64_t step_{0};
  Pose2 true_pose_;
  Pose2 true_at_scan_;
  std::deque<Pose2> history_;
  double phase_{0.0};
  WaypointDriver driver_;
  Twist2 teleop_cmd_{};
  double teleop_stamp_{-1.0};

  estimation::MadgwickFilter madgwick_;
  estimation::OdomState odom_{};
  Pose2 odom_fed_{};  // odometry at the last scan handed to the backend
  double skip_until_{-1.0};

  gait::LlChannel channel_;
  std::unique_ptr<gait::LowLevelController> ll_;

  std::optional<slam::FilterMapper> filter_;
  std::unique_ptr<slam::GraphMapper> graph_;
  std::unique_ptr<slam::ScanQueue> queue_;
  std::thread worker_;
  std::mutex mu_;  // guards graph_, processed_, latest_*
  std::condition_variable idle_cv_;
  std::uint64_t pushed_{0};
  std::uint64_t processed_{0};
  std::exception_ptr worker_error_;
  Pose2 latest_estimate_{};
  Pose2 latest_odom_{};

  RobotOutcome out_;
  bool finished_{false};
};

}  // namespace quadslam::app
