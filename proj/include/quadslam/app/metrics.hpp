#pragma once

#include "quadslam/mapping/occupancy_grid.hpp"
#include "quadslam/slam/filter.hpp"
#include "quadslam/world/environment.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace quadslam::app {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using slam::StampedPose;

/// Positional RMSE with no alignment. Each estimate is paired with the truth
/// sample nearest in time; pairs further apart than `tolerance` are skipped.
/// Throws MetricsError when either trajectory is empty or nothing pairs up.
double absolute_trajectory_error(std::span<const StampedPose> truth, std::span<const StampedPose> estimate,
                                 double tolerance = 0.05);

/// Every pose mapped through `frame` (frame ∘ pose).
std::vector<StampedPose> to_frame(std::span<const StampedPose> poses, const Pose2& frame);

/// Ground truth for one cell of `grid`: Occupied when any wall touches the
/// closed cell square, Free otherwise. `grid_to_world` places the grid's own
/// frame in the environment.
class TruthRaster {
 public:
  TruthRaster(const world::Environment& env, const mapping::OccupancyGrid& grid, const Pose2& grid_to_world);
  mapping::CellClass at(int ix, int iy) const;

 private:
  int width_{0};
  int height_{0};
  std::vector<std::uint8_t> occupied_;
};

struct Agreement {
  std::size_t observed{0};  // non-unknown cells
  std::size_t matching{0};
  double fraction() const { return observed == 0 ? 0.0 : static_cast<double>(matching) / static_cast<double>(observed); }
};

/// Share of the observed cells whose ternary class equals the truth raster.
Agreement occupancy_agreement(const mapping::OccupancyGrid& grid, const Pose2& grid_to_world,
                              const world::Environment& env);

/// Observed-area overlap of two maps in world coordinates: cells of a common
/// lattice (pitch = the finer resolution) observed by both, over cells
/// observed by either.
double observed_overlap(const mapping::OccupancyGrid& a, const Pose2& a_to_world, const mapping::OccupancyGrid& b,
                        const Pose2& b_to_world);

struct TransformError {
  double translation{0.0};  // m
  double rotation{0.0};     // rad, absolute
};

TransformError transform_error(const Pose2& estimate, const Pose2& truth);

}  // namespace quadslam::app
