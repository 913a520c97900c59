#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <vector>

namespace quadslam::mapping {

enum class CellClass : std::uint8_t { Free, Occupied, Unknown };

struct LogOddsParams {
  double hit{0.85};
  double miss{-0.4};
  double min{-4.0};
  double max{4.0};
  double occupied_threshold{0.85};  // strictly above → occupied
  double free_threshold{-0.85};     // strictly below → free
  bool operator==(const LogOddsParams&) const = default;
};

struct CellIndex {
  int x{0};
  int y{0};
  bool operator==(const CellIndex&) const = default;
};

/// Log-odds occupancy grid. `origin` is the pose of the (0,0) cell's corner;
/// cell (ix, iy) spans [ix, ix+1) × [iy, iy+1) cells in the origin frame.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(double resolution, int width, int height, const Pose2& origin,
                LogOddsParams params = {});

  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Pose2& origin() const { return origin_; }
  const LogOddsParams& params() const { return params_; }
  std::size_t cell_count() const { return cells_.size(); }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  bool in_bounds(CellIndex c) const { return in_bounds(c.x, c.y); }
  double at(int ix, int iy) const { return cells_[index(ix, iy)]; }
  /// Sets the value, clamped to [min, max].
  void set(int ix, int iy, double v);
  void add(int ix, int iy, double delta) { set(ix, iy, at(ix, iy) + delta); }

  CellClass classify(double v) const {
    if (v > params_.occupied_threshold) return CellClass::Occupied;
    if (v < params_.free_threshold) return CellClass::Free;
    return CellClass::Unknown;
  }
  CellClass classify(int ix, int iy) const { return classify(at(ix, iy)); }
  std::size_t count(CellClass c) const;

  /// Floor-based cell lookup; the result may be out of bounds.
  CellIndex world_to_cell(const Eigen::Vector2d& p) const;
  Eigen::Vector2d cell_center(int ix, int iy) const;
  /// Grid-frame (origin-relative, meters) coordinates of a world point.
  Eigen::Vector2d to_local(const Eigen::Vector2d& p) const;

  /// Doubles width and/or height (keeping world placement of existing cells)
  /// until `p` lies at least `margin` cells inside.
  void grow_to_include(const Eigen::Vector2d& p, int margin = 2);

  const std::vector<double>& data() const { return cells_; }
  std::vector<double>& data() { return cells_; }

  /// Ternary classification of every cell, row-major from (0,0).
  std::vector<CellClass> ternary() const;

  bool operator==(const OccupancyGrid&) const = default;

 private:
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix);
  }

  double resolution_{0.05};
  int width_{0};
  int height_{0};
  Pose2 origin_{};
  LogOddsParams params_{};
  std::vector<double> cells_;
};

/// Square all-unknown grid of at least `size_m` with `center` at a cell center.
OccupancyGrid make_grid_around(const Eigen::Vector2d& center, double size_m, double resolution,
                               LogOddsParams params = {});

/// Cells visited by a Bresenham line from a to b, inclusive of both ends.
std::vector<CellIndex> bresenham(CellIndex a, CellIndex b);

/// Ray-traces every returning beam from `sensor_pose`: cells between sensor
/// and endpoint get `miss`, the endpoint cell gets `hit`. Grows the grid as
/// needed.
void integrate_scan(OccupancyGrid& grid, const Pose2& sensor_pose, const LaserScan& scan);

/// Euclidean distance (meters, cell-center to cell-center) to the nearest
/// obstacle cell, where an obstacle is any cell with positive log-odds.
class DistanceField {
 public:
  explicit DistanceField(const OccupancyGrid& grid);

  bool empty() const { return empty_; }
  /// Infinity when no obstacles exist or the cell is out of bounds.
  double distance(int ix, int iy) const;

 private:
  int width_{0};
  int height_{0};
  double resolution_{0.05};
  bool empty_{true};
  std::vector<double> sq_;  // squared distances in cells
};

}  // namespace quadslam::mapping
