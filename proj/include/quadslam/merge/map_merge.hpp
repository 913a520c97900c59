#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/mapping/occupancy_grid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace quadslam::merge {

struct MapFeature {
  Eigen::Vector2d position;  // map (world) frame, m
  double orientation{0.0};   // rad
  /// Occupied fraction around rings centred on the keypoint, sampled from
  /// `orientation` counter-clockwise; NaN where the map is unobserved.
  std::vector<double> descriptor;
};

/// RMS difference over samples observed in both; infinity when fewer than
/// `min_overlap` of them are.
double descriptor_distance(const std::vector<double>& a, const std::vector<double>& b, double min_overlap);

struct FeatureConfig {
  double blur_sigma{1.0};          // cells, applied to the occupancy image
  double tensor_sigma{1.5};        // cells, structure-tensor window
  double quality_level{0.05};      // response threshold relative to the strongest corner
  double min_response{1e-4};
  int nms_radius{3};               // cells
  double descriptor_sigma{3.0};    // cells, blur of the images sampled by the rings
  double ring_inner{2.0};          // cells
  double ring_step{4.0};           // cells
  int ring_count{14};
  int ring_samples{32};
  double known_fraction{0.5};      // below this a ring sample is unobserved (NaN)
  double min_overlap{0.3};         // fraction of samples observed in both descriptors
  int orientation_radius{14};      // cells

  std::size_t descriptor_length() const {
    return static_cast<std::size_t>(ring_count) * static_cast<std::size_t>(ring_samples);
  }
};

struct MergeConfig {
  FeatureConfig features;
  double ratio_test{0.8};
  int ransac_iterations{500};
  double inlier_threshold_cells{3.0};
  double early_exit_ratio{0.9};
  double min_confidence{0.5};
  int min_inliers{10};
  std::uint64_t seed{7};
};

struct MapTransform {
  Pose2 transform;  // maps frame of B into frame of A
  int inlier_count{0};
  int matched_count{0};
  double confidence{0.0};  // inliers / matched pairs
};

class MergeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<MapFeature> extract_features(const mapping::OccupancyGrid& grid, const FeatureConfig& cfg = {});

struct FeatureMatch {
  std::size_t a;
  std::size_t b;
  double distance;
};

/// Mutual nearest neighbours in descriptor space passing the ratio test.
std::vector<FeatureMatch> match_features(const std::vector<MapFeature>& a, const std::vector<MapFeature>& b,
                                         double ratio, double min_overlap = FeatureConfig{}.min_overlap);

/// Rigid least-squares fit of pairs (b_i → a_i).
Pose2 fit_rigid(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b);

/// Alignment of map_b into map_a, or nullopt when no overlap is found.
std::optional<MapTransform> estimate_transform(const mapping::OccupancyGrid& a, const mapping::OccupancyGrid& b,
                                               const MergeConfig& cfg = {});

/// Resamples `src` moved by `motion` (applied to its world coordinates) onto
/// a fresh axis-aligned lattice of `resolution` covering the moved extent,
/// by nearest-cell inverse lookup.
mapping::OccupancyGrid transform_grid(const mapping::OccupancyGrid& src, const Pose2& motion, double resolution);

struct MergeResult {
  mapping::OccupancyGrid merged;
  /// One entry per input; nullopt for maps with no alignment path.
  std::vector<std::optional<MapTransform>> transforms;
  std::vector<std::size_t> excluded;
};

/// Anchors on grids[0]; aligns the rest directly or through already aligned
/// maps; sums log-odds of aligned maps on the anchor lattice.
MergeResult merge_maps(std::span<const mapping::OccupancyGrid> grids, const MergeConfig& cfg = {});

}  // namespace quadslam::merge
