#include "quadslam/app/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace quadslam::app {

double absolute_trajectory_error(std::span<const StampedPose> truth, std::span<const StampedPose> estimate,
                                 double tolerance) {
  if (truth.empty() || estimate.empty()) throw MetricsError("empty trajectory");
  std::vector<StampedPose> sorted(truth.begin(), truth.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const StampedPose& a, const StampedPose& b) { return a.timestamp < b.timestamp; });
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : estimate) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), e.timestamp,
                               [](const StampedPose& s, double t) { return s.timestamp < t; });
    const StampedPose* best = nullptr;
    if (it != sorted.end()) best = &*it;
    if (it != sorted.begin()) {
      const StampedPose& prev = *std::prev(it);
      if (!best || e.timestamp - prev.timestamp <= best->timestamp - e.timestamp) best = &prev;
    }
    if (!best || std::abs(best->timestamp - e.timestamp) > tolerance) continue;
    sum += (e.pose.translation() - best->pose.translation()).squaredNorm();
    ++n;
  }
  if (n == 0) throw MetricsError("no estimate lies within tolerance of a truth sample");
  return std::sqrt(sum / static_cast<double>(n));
}

std::vector<StampedPose> to_frame(std::span<const StampedPose> poses, const Pose2& frame) {
  std::vector<StampedPose> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back({p.timestamp, compose(frame, p.pose)});
  return out;
}

namespace {

// Liang-Barsky test of segment p0→p1 against the closed box [lo, hi].
bool segment_touches_box(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1, const Eigen::Vector2d& lo,
                         const Eigen::Vector2d& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector2d d = p1 - p0;
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (p0[k] < lo[k] || p0[k] > hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - p0[k]) / d[k];
    double tb = (hi[k] - p0[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

TruthRaster::TruthRaster(const world::Environment& env, const mapping::OccupancyGrid& grid,
                         const Pose2& grid_to_world)
    : width_(grid.width()), height_(grid.height()),
      occupied_(static_cast<std::size_t>(grid.width()) * static_cast<std::size_t>(grid.height()), 0) {
  const Pose2 world_to_cells = inverse(compose(grid_to_world, grid.origin()));
  const double res = grid.resolution();
  for (const auto& wall : env.walls()) {
    // Cell units, so cell (ix, iy) is the unit square at (ix, iy).
    const Eigen::Vector2d a = world_to_cells.transform(wall.a) / res;
    const Eigen::Vector2d b = world_to_cells.transform(wall.b) / res;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()))) - 1);
    const int x1 = std::min(width_ - 1, static_cast<int>(std::floor(std::max(a.x(), b.x()))) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()))) - 1);
    const int y1 = std::min(height_ - 1, static_cast<int>(std::floor(std::max(a.y(), b.y()))) + 1);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) {
        auto& cell = occupied_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)];
        if (!cell && segment_touches_box(a, b, {double(ix), double(iy)}, {ix + 1.0, iy + 1.0})) cell = 1;
      }
  }
}

mapping::CellClass TruthRaster::at(int ix, int iy) const {
  return occupied_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)]
             ? mapping::CellClass::Occupied
             : mapping::CellClass::Free;
}

Agreement occupancy_agreement(const mapping::OccupancyGrid& grid, const Pose2& grid_to_world,
                              const world::Environment& env) {
  const TruthRaster truth(env, grid, grid_to_world);
  Agreement out;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix) {
      const auto c = grid.classify(ix, iy);
      if (c == mapping::CellClass::Unknown) continue;
      ++out.observed;
      if (c == truth.at(ix, iy)) ++out.matching;
    }
  return out;
}

namespace {

std::set<std::pair<long, long>> observed_cells(const mapping::OccupancyGrid& g, const Pose2& to_world, double pitch) {
  std::set<std::pair<long, long>> out;
  const Pose2 grid_world = compose(to_world, g.origin());
  for (int iy = 0; iy < g.height(); ++iy)
    for (int ix = 0; ix < g.width(); ++ix) {
      if (g.classify(ix, iy) == mapping::CellClass::Unknown) continue;
      const Eigen::Vector2d w =
          grid_world.transform({(ix + 0.5) * g.resolution(), (iy + 0.5) * g.resolution()});
      out.emplace(static_cast<long>(std::floor(w.x() / pitch)), static_cast<long>(std::floor(w.y() / pitch)));
    }
  return out;
}

}  // namespace

double observed_overlap(const mapping::OccupancyGrid& a, const Pose2& a_to_world, const mapping::OccupancyGrid& b,
                        const Pose2& b_to_world) {
  const double pitch = std::min(a.resolution(), b.resolution());
  const auto sa = observed_cells(a, a_to_world, pitch);
  const auto sb = observed_cells(b, b_to_world, pitch);
  std::size_t both = 0;
  for (const auto& k : sa) both += sb.count(k);
  const std::size_t either = sa.size() + sb.size() - both;
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

TransformError transform_error(const Pose2& estimate, const Pose2& truth) {
  return {(estimate.translation() - truth.translation()).norm(), std::abs(angle_diff(estimate.theta, truth.theta))};
}

}  // namespace quadslam::app
