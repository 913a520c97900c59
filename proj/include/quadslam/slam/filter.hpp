#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/mapping/occupancy_grid.hpp"
#include "quadslam/slam/likelihood.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace quadslam::slam {

struct StampedPose {
  double timestamp{0.0};
  Pose2 pose;
  bool operator==(const StampedPose&) const = default;
};

/// Odometry-proportional motion noise (rr: trans from trans, rt: trans from
/// rot, tr: rot from trans, tt: rot from rot).
struct MotionNoise {
  double srr{0.1};
  double srt{0.2};
  double str{0.1};
  double stt{0.2};
};

struct FilterConfig {
  int particle_count{30};
  double resample_threshold{0.5};    // fraction of particle_count
  double match_confidence_min{0.55};  // normalized score gate for map updates
  MotionNoise motion;
  LikelihoodParams likelihood;
  ClimbParams climb;
  double resolution{0.05};
  double initial_extent{4.0};  // m, square grid around the start
  mapping::LogOddsParams log_odds;
  std::uint64_t seed{42};

  void validate() const;
};

/// Persistent singly linked pose history shared between resampled particles.
struct TrajectoryNode {
  StampedPose value;
  std::shared_ptr<const TrajectoryNode> parent;
};

struct Particle {
  Pose2 pose;
  double weight{0.0};
  std::shared_ptr<const mapping::OccupancyGrid> grid;
  std::shared_ptr<const mapping::DistanceField> field;
  std::shared_ptr<const TrajectoryNode> history;

  std::vector<StampedPose> trajectory() const;
};

struct UpdateReport {
  double neff{0.0};
  bool resampled{false};
  bool lost{false};
  int integrated{0};  // particles whose grid passed the confidence gate
  double best_score{0.0};
};

struct FilterState {
  FilterConfig cfg;
  std::vector<Particle> particles;
  std::mt19937_64 rng;
  std::uint64_t updates{0};
  UpdateReport last;
};

FilterState rbpf_init(const FilterConfig& cfg, const Pose2& start, double timestamp = 0.0);

/// One filter step: sample, refine, weight, maybe resample, gated integrate.
void rbpf_update(FilterState& state, const Pose2& odom_delta, const LaserScan& scan);

double effective_sample_size(std::span<const Particle> particles);

/// Indices drawn by systematic resampling with offset `u` ∈ [0, 1).
/// `weights` must be normalized.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u);

/// Odometry delta perturbed by the motion model.
Pose2 sample_motion(const Pose2& delta, const MotionNoise& noise, std::mt19937_64& rng);

struct BestMap {
  std::shared_ptr<const mapping::OccupancyGrid> grid;
  std::vector<StampedPose> trajectory;
  std::size_t index{0};
};

/// Highest-weight particle; ties go to the lowest index.
BestMap best_map(const FilterState& state);
std::size_t best_index(const FilterState& state);

/// Feeds the filter only after enough accumulated motion, like a
/// gmapping-style node.
class FilterMapper {
 public:
  struct Options {
    double linear_update{0.15};   // m
    double angular_update{0.15};  // rad
  };

  FilterMapper(const FilterConfig& cfg, const Pose2& start, Options opt);
  explicit FilterMapper(const FilterConfig& cfg, const Pose2& start = {})
      : FilterMapper(cfg, start, Options{}) {}

  /// Returns true when the filter was updated.
  bool process(const Pose2& odom_delta, const LaserScan& scan);

  /// Best particle pose composed with the motion not yet consumed.
  Pose2 pose() const;
  const FilterState& state() const { return state_; }
  std::uint64_t updates() const { return state_.updates; }

 private:
  FilterState state_;
  Options opt_;
  Pose2 pending_{};
  bool first_{true};
};

}  // namespace quadslam::slam
