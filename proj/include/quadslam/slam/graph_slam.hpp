#pragma once

#include "quadslam/mapping/occupancy_grid.hpp"
#include "quadslam/slam/pose_graph.hpp"
#include "quadslam/slam/scan_matcher.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace quadslam::slam {

enum class MappingMode : std::uint8_t { Synchronous, Asynchronous };

struct GraphConfig {
  double min_translation{0.2};  // m, node spacing
  double min_rotation{0.35};    // rad
  MatcherConfig matcher;
  double match_min_score{0.5};
  double loop_radius{2.0};
  double loop_min_score{0.6};
  int loop_recent_exclusion{10};
  int loop_max_candidates{3};
  OptimizerConfig optimizer;
  Eigen::Vector3d odometry_information{50.0, 50.0, 100.0};
  Eigen::Vector3d match_information{400.0, 400.0, 1000.0};  // scaled by match score
  MappingMode mode{MappingMode::Synchronous};
  double map_resolution{0.05};

  void validate() const;
  /// Stable digest of every field, stored in saved graphs.
  std::uint64_t hash() const;
};

/// Adds a scan with the odometry accumulated since the previous call. A new
/// node is initialized from odometry, linked to its predecessor by an
/// odometry or scan-match edge, and checked for loop closures; the graph is
/// optimized whenever closures are added. Returns the id of the node created,
/// if any.
std::optional<int> graph_add_scan(PoseGraph& g, const Pose2& odom_delta, const LaserScan& scan,
                                  const GraphConfig& cfg);

/// Loop-closure edges (candidate → node) for `node_id`; does not modify g.
std::vector<PoseGraphEdge> detect_loop_closures(const PoseGraph& g, int node_id, const GraphConfig& cfg);

/// Fresh grid with every node's scan ray-traced from its current pose.
mapping::OccupancyGrid render_map(const PoseGraph& g, double resolution,
                                  const mapping::LogOddsParams& params = {});

/// Drives a pose graph from an odometry + scan stream.
class GraphMapper {
 public:
  explicit GraphMapper(const GraphConfig& cfg);
  GraphMapper(const GraphConfig& cfg, PoseGraph resumed);

  std::optional<int> process(const Pose2& odom_delta, const LaserScan& scan);
  /// Final optimization.
  OptimizeResult finish();

  /// Latest node pose composed with the odometry not yet turned into a node.
  Pose2 pose() const;
  const PoseGraph& graph() const { return graph_; }
  const GraphConfig& config() const { return cfg_; }
  int loop_closures() const;

 private:
  GraphConfig cfg_;
  PoseGraph graph_;
};

}  // namespace quadslam::slam
