#include "quadslam/slam/graph_slam.hpp"

#include "quadslam/core/bytes.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>

namespace quadslam::slam {

void GraphConfig::validate() const {
  if (!(min_translation > 0.0) || !(min_rotation > 0.0)) throw std::invalid_argument("node spacing must be > 0");
  matcher.validate();
  if (match_min_score < 0.0 || match_min_score > 1.0 || loop_min_score < 0.0 || loop_min_score > 1.0)
    throw std::invalid_argument("match scores must be in [0, 1]");
  if (!(loop_radius > 0.0) || loop_recent_exclusion < 0 || loop_max_candidates < 0)
    throw std::invalid_argument("invalid loop-closure settings");
  if (optimizer.max_iterations < 0 || !(optimizer.tolerance >= 0.0))
    throw std::invalid_argument("invalid optimizer settings");
  if ((odometry_information.array() <= 0.0).any() || (match_information.array() <= 0.0).any())
    throw std::invalid_argument("information weights must be > 0");
  if (!(map_resolution > 0.0)) throw std::invalid_argument("map_resolution must be > 0");
}

std::uint64_t GraphConfig::hash() const {
  ByteWriter w;
  for (double v : {min_translation, min_rotation, matcher.window_linear, matcher.window_angular,
                   matcher.coarse_linear, matcher.coarse_angular, matcher.fine_linear, matcher.fine_angular,
                   matcher.lookup_resolution, matcher.lookup_sigma, matcher.link_max_gap, matcher.penalty_gain,
                   match_min_score, loop_radius, loop_min_score, optimizer.tolerance, map_resolution})
    w.f64(v);
  for (int i = 0; i < 3; ++i) {
    w.f64(odometry_information(i));
    w.f64(match_information(i));
  }
  w.u32(static_cast<std::uint32_t>(matcher.query_stride));
  w.u32(static_cast<std::uint32_t>(loop_recent_exclusion));
  w.u32(static_cast<std::uint32_t>(loop_max_candidates));
  w.u32(static_cast<std::uint32_t>(optimizer.max_iterations));
  w.u8(static_cast<std::uint8_t>(mode));
  const auto bytes = w.take();
  const auto lo = crc32(0L, bytes.data(), static_cast<uInt>(bytes.size()));
  const auto hi = adler32(1L, bytes.data(), static_cast<uInt>(bytes.size()));
  return (static_cast<std::uint64_t>(hi) << 32) | static_cast<std::uint64_t>(lo);
}

namespace {

Eigen::Matrix3d diag(const Eigen::Vector3d& v) { return v.asDiagonal(); }

bool has_returns(const LaserScan& s) {
  return std::any_of(s.ranges.begin(), s.ranges.end(), [](double r) { return has_return(r); });
}

}  // namespace

std::optional<int> graph_add_scan(PoseGraph& g, const Pose2& odom_delta, const LaserScan& scan,
                                  const GraphConfig& cfg) {
  g.clock = scan.timestamp;
  if (g.empty()) {
    g.pending_odometry = Pose2::identity();
    return g.add_node(Pose2::identity(), scan);
  }
  g.pending_odometry = compose(g.pending_odometry, odom_delta);
  const Pose2 acc = g.pending_odometry;
  if (std::hypot(acc.x, acc.y) < cfg.min_translation && std::abs(acc.theta) < cfg.min_rotation)
    return std::nullopt;

  const PoseGraphNode& prev = g.nodes().back();
  const int prev_id = prev.id;
  const Pose2 prev_pose = prev.pose;
  const LaserScan prev_scan = prev.scan;
  const int id = g.add_node(compose(prev_pose, acc), scan);
  g.pending_odometry = Pose2::identity();

  PoseGraphEdge edge{prev_id, id, acc, diag(cfg.odometry_information), EdgeKind::Odometry};
  if (has_returns(prev_scan) && has_returns(scan)) {
    const auto m = scan_match(prev_scan, Pose2::identity(), scan, acc, cfg.matcher);
    if (m.score >= cfg.match_min_score && m.score > 0.0) {
      edge.measurement = m.pose;
      edge.information = diag(cfg.match_information) * m.score;
      edge.kind = EdgeKind::ScanMatch;
    }
  }
  g.add_edge(edge);

  const auto closures = detect_loop_closures(g, id, cfg);
  for (const auto& e : closures) g.add_edge(e);
  if (!closures.empty()) optimize(g, cfg.optimizer);
  return id;
}

std::vector<PoseGraphEdge> detect_loop_closures(const PoseGraph& g, int node_id, const GraphConfig& cfg) {
  std::vector<PoseGraphEdge> out;
  const auto idx = g.index_of(node_id);
  if (!idx) throw GraphError("no node with id " + std::to_string(node_id));
  const auto& node = g.nodes()[*idx];
  if (!has_returns(node.scan)) return out;
  const auto excluded = static_cast<std::size_t>(cfg.loop_recent_exclusion);
  if (*idx <= excluded) return out;

  std::vector<std::pair<double, std::size_t>> cands;
  for (std::size_t i = 0; i + excluded < *idx; ++i) {
    const auto& c = g.nodes()[i];
    const double d = std::hypot(c.pose.x - node.pose.x, c.pose.y - node.pose.y);
    if (d <= cfg.loop_radius && has_returns(c.scan)) cands.emplace_back(d, i);
  }
  std::sort(cands.begin(), cands.end());
  if (cands.size() > static_cast<std::size_t>(cfg.loop_max_candidates))
    cands.resize(static_cast<std::size_t>(cfg.loop_max_candidates));
  for (const auto& [d, i] : cands) {
    const auto& c = g.nodes()[i];
    const auto m = scan_match(c.scan, Pose2::identity(), node.scan, between(c.pose, node.pose), cfg.matcher);
    if (m.score >= cfg.loop_min_score)
      out.push_back({c.id, node.id, m.pose, diag(cfg.match_information) * m.score, EdgeKind::LoopClosure});
  }
  return out;
}

mapping::OccupancyGrid render_map(const PoseGraph& g, double resolution, const mapping::LogOddsParams& params) {
  const Pose2 start = g.empty() ? Pose2{} : g.node(g.anchor()).pose;
  auto grid = mapping::make_grid_around(start.translation(), 4.0, resolution, params);
  for (const auto& n : g.nodes()) mapping::integrate_scan(grid, n.pose, n.scan);
  return grid;
}

GraphMapper::GraphMapper(const GraphConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  graph_.config_hash = cfg_.hash();
}

GraphMapper::GraphMapper(const GraphConfig& cfg, PoseGraph resumed) : cfg_(cfg), graph_(std::move(resumed)) {
  cfg_.validate();
  if (graph_.config_hash != cfg_.hash()) throw GraphError("saved graph was built with a different configuration");
}

std::optional<int> GraphMapper::process(const Pose2& odom_delta, const LaserScan& scan) {
  return graph_add_scan(graph_, odom_delta, scan, cfg_);
}

int GraphMapper::loop_closures() const {
  return static_cast<int>(std::count_if(graph_.edges().begin(), graph_.edges().end(),
                                        [](const PoseGraphEdge& e) { return e.kind == EdgeKind::LoopClosure; }));
}

OptimizeResult GraphMapper::finish() { return optimize(graph_, cfg_.optimizer); }

Pose2 GraphMapper::pose() const {
  if (graph_.empty()) return graph_.pending_odometry;
  return compose(graph_.nodes().back().pose, graph_.pending_odometry);
}

}  // namespace quadslam::slam
