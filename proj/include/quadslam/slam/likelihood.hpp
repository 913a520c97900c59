#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/mapping/occupancy_grid.hpp"

#include <vector>

namespace quadslam::slam {

struct LikelihoodParams {
  double sigma_hit{0.1};      // m
  double outlier_floor{0.05};
  int beam_stride{4};
};

struct ScanScore {
  double log_likelihood{0.0};  // sum over all sampled beams
  double observed_log_likelihood{0.0};  // sum over beams ending in observed cells
  double normalized{1.0};      // geometric mean over beams ending in observed cells
  int observed_beams{0};
  int sampled_beams{0};
};

/// Sensor-frame endpoints of every `stride`-th returning beam.
std::vector<Eigen::Vector2d> sample_endpoints(const LaserScan& scan, int stride);

/// Likelihood-field score. Each sampled endpoint contributes
/// max(exp(-d²/2σ²), floor), d = distance to the nearest obstacle cell.
/// Endpoints in never-observed cells contribute the floor to the
/// log-likelihood and are left out of the normalized score. An empty field
/// scores 1.0.
ScanScore score_endpoints(const mapping::OccupancyGrid& grid, const mapping::DistanceField& field,
                          const Pose2& pose, const std::vector<Eigen::Vector2d>& endpoints,
                          const LikelihoodParams& params);

/// Normalized score ∈ (0, 1] of `scan` taken at `pose` against `grid`.
double scan_likelihood(const mapping::OccupancyGrid& grid, const Pose2& pose, const LaserScan& scan,
                       const LikelihoodParams& params = {});

struct ClimbParams {
  double linear_step{0.05};   // m
  double angular_step{0.05};  // rad
  int halvings{5};
  int max_iterations{60};
  double trim_fraction{0.1};  // worst observed beams ignored by the objective
};

struct ClimbResult {
  Pose2 pose;
  ScanScore score;
  double objective{0.0};
};

/// Steepest-ascent hill climb over (x, y, theta), taking only strictly
/// improving moves and halving the step on failure. The objective is the
/// trimmed log-likelihood of beams ending in observed cells: unobserved
/// endpoints are left out so the climb does not drag them into mapped cells,
/// and the worst `trim_fraction` are dropped so a few stray beams cannot pull
/// an already consistent pose.
ClimbResult hill_climb(const mapping::OccupancyGrid& grid, const mapping::DistanceField& field,
                       const Pose2& initial, const std::vector<Eigen::Vector2d>& endpoints,
                       const LikelihoodParams& lik, const ClimbParams& climb);

}  // namespace quadslam::slam
