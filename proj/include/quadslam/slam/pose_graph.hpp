#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace quadslam::slam {

enum class EdgeKind : std::uint8_t { Odometry = 0, ScanMatch = 1, LoopClosure = 2 };

struct PoseGraphNode {
  int id{0};
  Pose2 pose;
  LaserScan scan;
  bool operator==(const PoseGraphNode&) const = default;
};

struct PoseGraphEdge {
  int from{0};
  int to{0};
  Pose2 measurement;  // pose of `to` in the frame of `from`
  Eigen::Matrix3d information{Eigen::Matrix3d::Identity()};
  EdgeKind kind{EdgeKind::Odometry};
  bool operator==(const PoseGraphEdge&) const = default;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PoseGraph {
 public:
  const std::vector<PoseGraphNode>& nodes() const { return nodes_; }
  const std::vector<PoseGraphEdge>& edges() const { return edges_; }
  std::vector<PoseGraphEdge>& edges() { return edges_; }
  bool empty() const { return nodes_.empty(); }
  int anchor() const { return anchor_; }
  int next_id() const { return next_id_; }

  /// Appends a node with the next id; the first node becomes the anchor.
  int add_node(const Pose2& pose, const LaserScan& scan);
  /// Validates endpoints and that the information matrix is SPD.
  void add_edge(const PoseGraphEdge& e);

  std::optional<std::size_t> index_of(int id) const;
  const PoseGraphNode& node(int id) const;
  void set_pose(int id, const Pose2& p);

  /// Bookkeeping for incremental construction and save/continue.
  Pose2 pending_odometry{};
  double clock{0.0};
  std::uint64_t config_hash{0};

  bool operator==(const PoseGraph&) const = default;

  // Used by deserialization only.
  void restore(std::vector<PoseGraphNode> nodes, std::vector<PoseGraphEdge> edges, int anchor, int next_id);

 private:
  std::vector<PoseGraphNode> nodes_;  // sorted by id
  std::vector<PoseGraphEdge> edges_;
  int anchor_{0};
  int next_id_{0};
};

/// Residual between(from, to) ⊖ z (component-wise, wrapped angle) and its
/// Jacobians with respect to `from` (a) and `to` (b).
struct EdgeLinearization {
  Eigen::Vector3d residual;
  Eigen::Matrix3d a;
  Eigen::Matrix3d b;
};

EdgeLinearization linearize_edge(const Pose2& from, const Pose2& to, const Pose2& z);
Eigen::Vector3d edge_residual(const Pose2& from, const Pose2& to, const Pose2& z);

double chi2(const PoseGraph& g);
bool is_connected(const PoseGraph& g);

struct OptimizerConfig {
  int max_iterations{20};
  double tolerance{1e-6};  // relative chi² decrease that counts as converged
};

struct OptimizeResult {
  double initial_chi2{0.0};
  double final_chi2{0.0};
  int iterations{0};  // accepted steps
  bool converged{false};
};

/// Gauss-Newton with Levenberg damping on rejected steps; anchor held fixed.
/// Throws GraphError when disconnected or when the system stays singular.
OptimizeResult optimize(PoseGraph& g, const OptimizerConfig& cfg = {});

}  // namespace quadslam::slam
