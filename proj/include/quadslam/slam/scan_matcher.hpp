#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace quadslam::slam {

class UnusableScan : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MatcherConfig {
  double window_linear{0.3};                 // ± m
  double window_angular{deg2rad(15.0)};      // ± rad
  double coarse_linear{0.05};
  double coarse_angular{deg2rad(1.0)};
  double fine_linear{0.01};
  double fine_angular{deg2rad(0.25)};
  double lookup_resolution{0.02};
  double lookup_sigma{0.03};
  double link_max_gap{0.3};   // consecutive reference endpoints closer than this are joined
  double penalty_gain{0.2};   // distance-from-guess penalty on the ranking score
  int query_stride{1};

  void validate() const;
};

struct MatchResult {
  Pose2 pose;          // world pose of the query scan
  double score{0.0};   // mean lookup value ∈ [0, 1]
};

/// Smoothed raster of a reference scan: cells containing a reference point
/// hold 1.0, neighbours a Gaussian of their distance to it.
class LookupGrid {
 public:
  LookupGrid(const std::vector<Eigen::Vector2d>& points, const std::vector<bool>& link_next,
             double resolution, double sigma, double margin);

  /// Bilinear interpolation between cell centers; 0 outside.
  double at(const Eigen::Vector2d& p) const {
    const double fx = (p.x() - ox_) * inv_res_ - 0.5, fy = (p.y() - oy_) * inv_res_ - 0.5;
    const double x0 = std::floor(fx), y0 = std::floor(fy);
    const int ix = static_cast<int>(x0), iy = static_cast<int>(y0);
    const double tx = fx - x0, ty = fy - y0;
    return (1 - ty) * ((1 - tx) * cell(ix, iy) + tx * cell(ix + 1, iy)) +
           ty * ((1 - tx) * cell(ix, iy + 1) + tx * cell(ix + 1, iy + 1));
  }

  /// Value of the cell containing p.
  double nearest(const Eigen::Vector2d& p) const {
    return cell(static_cast<int>(std::floor((p.x() - ox_) * inv_res_)),
                static_cast<int>(std::floor((p.y() - oy_) * inv_res_)));
  }

  double cell(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= w_ || iy >= h_) return 0.0;
    return v_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(ix)];
  }

 private:
  void stamp(const Eigen::Vector2d& p, double sigma, int radius);
  double ox_{0}, oy_{0}, inv_res_{1}, res_{1};
  int w_{0}, h_{0};
  std::vector<double> v_;
};

/// Mean lookup value of `query` placed at `pose` against a reference raster.
double correlation_score(const LookupGrid& lookup, const std::vector<Eigen::Vector2d>& query_points,
                         const Pose2& pose);

/// Two-level correlative search around `initial`. Throws UnusableScan when
/// either scan has no returns.
MatchResult scan_match(const LaserScan& reference, const Pose2& reference_pose, const LaserScan& query,
                       const Pose2& initial, const MatcherConfig& cfg = {});

}  // namespace quadslam::slam
