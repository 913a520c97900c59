#include "quadslam/core/scan.hpp"

#include <stdexcept>

namespace quadslam {

void LidarConfig::validate() const {
  if (beam_count < 2) throw std::invalid_argument("lidar: beam_count must be >= 2");
  if (!(range_min < range_max)) throw std::invalid_argument("lidar: range_min must be < range_max");
  if (!(angle_min < angle_max)) throw std::invalid_argument("lidar: angles must be strictly increasing");
  if (range_noise_sigma < 0.0) throw std::invalid_argument("lidar: negative noise sigma");
  if (scan_rate <= 0.0) throw std::invalid_argument("lidar: scan_rate must be positive");
}

std::size_t LaserScan::valid_count() const {
  std::size_t n = 0;
  for (double r : ranges) n += has_return(r) ? 1 : 0;
  return n;
}

std::vector<Eigen::Vector2d> LaserScan::points() const {
  std::vector<Eigen::Vector2d> out;
  out.reserve(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i)
    if (has_return(ranges[i])) out.push_back(endpoint(i));
  return out;
}

}  // namespace quadslam
