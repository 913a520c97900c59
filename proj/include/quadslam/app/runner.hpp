#pragma once

#include "quadslam/app/metrics.hpp"
#include "quadslam/app/robot.hpp"
#include "quadslam/app/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace quadslam::app {

struct RobotMetrics {
  std::string ns;
  Backend backend{Backend::Graph};
  double ate{0.0};           // m, SLAM estimate
  double ate_odometry{0.0};  // m, fused odometry alone
  Agreement agreement;
  std::size_t scans{0};
  std::size_t slam_updates{0};
  int loop_closures{0};
  std::uint64_t ll_frames{0};
  std::uint64_t ll_rejected{0};
  bool reached_goal{false};
};

struct MergeMetrics {
  std::string ns;
  bool aligned{false};
  double translation_error{0.0};  // m
  double rotation_error{0.0};     // deg
  int inliers{0};
  double confidence{0.0};
  double overlap{0.0};  // observed-area overlap with the anchor's map
};

struct RunMetrics {
  std::string scenario;
  std::uint64_t seed{0};
  double sim_time{0.0};
  std::vector<RobotMetrics> robots;
  bool merged{false};
  std::string anchor;
  Agreement merged_agreement;
  std::vector<MergeMetrics> merge;  // one per non-anchor robot
  bool aborted{false};
  std::string error;

  const RobotMetrics& robot(const std::string& ns) const;
};

nlohmann::json to_json(const RunMetrics& m);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: no artifacts
  std::optional<std::uint64_t> seed;
  std::optional<Transport> transport;
  bool teleop{false};  // every robot takes cmd_vel from the hub, paced at wall-clock speed
  /// Save every graph robot's pose graph at the first map period at or after
  /// this time, as <out>/<ns>_checkpoint.qsg.
  std::optional<double> checkpoint_at;
  bool stop_at_checkpoint{false};
  /// Graph robots to continue from a saved graph, by namespace.
  std::map<std::string, std::filesystem::path> resume;
  /// Called after every map period with the simulated time; throwing from
  /// it aborts the run.
  std::function<void(double)> progress;
  /// Called once the hub server listens (TCP transport or teleop).
  std::function<void(std::uint16_t tcp_port, std::uint16_t ws_port)> on_ready;
};

struct RunResult {
  RunMetrics metrics;
  std::map<std::string, RobotOutcome> outcomes;
  std::optional<mapping::OccupancyGrid> merged;
  double wall_seconds{0.0};
  std::optional<std::uint16_t> tcp_port;
  std::optional<std::uint16_t> ws_port;
};

/// Runs the scenario end to end: hub, robots, merger, then metrics and
/// artifacts. Config and environment errors are raised before anything
/// starts; a robot failure aborts the run and is reported in the metrics.
RunResult run_scenario(ScenarioConfig cfg, const RunOptions& opt = {});

/// Writes maps, trajectories, graph saves and metrics.json into `dir`.
void write_artifacts(const RunResult& result, const ScenarioConfig& cfg, const std::filesystem::path& dir);

}  // namespace quadslam::app
