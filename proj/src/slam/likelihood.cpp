#include "quadslam/slam/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace quadslam::slam {

std::vector<Eigen::Vector2d> sample_endpoints(const LaserScan& scan, int stride) {
  if (stride < 1) throw std::invalid_argument("beam stride must be >= 1");
  std::vector<Eigen::Vector2d> out;
  out.reserve(scan.ranges.size() / static_cast<std::size_t>(stride) + 1);
  for (std::size_t i = 0; i < scan.ranges.size(); i += static_cast<std::size_t>(stride))
    if (has_return(scan.ranges[i])) out.push_back(scan.endpoint(i));
  return out;
}

ScanScore score_endpoints(const mapping::OccupancyGrid& grid, const mapping::DistanceField& field,
                          const Pose2& pose, const std::vector<Eigen::Vector2d>& endpoints,
                          const LikelihoodParams& params) {
  ScanScore s;
  s.sampled_beams = static_cast<int>(endpoints.size());
  if (field.empty()) return s;
  const double log_floor = std::log(params.outlier_floor);
  const double inv = 1.0 / (2.0 * params.sigma_hit * params.sigma_hit);
  for (const auto& e : endpoints) {
    const auto c = grid.world_to_cell(pose.transform(e));
    if (!grid.in_bounds(c) || grid.at(c.x, c.y) == 0.0) {
      s.log_likelihood += log_floor;
      continue;
    }
    const double d = field.distance(c.x, c.y);
    const double l = std::max(-d * d * inv, log_floor);
    s.log_likelihood += l;
    s.observed_log_likelihood += l;
    ++s.observed_beams;
  }
  s.normalized = s.observed_beams > 0 ? std::exp(s.observed_log_likelihood / s.observed_beams) : 1.0;
  return s;
}

double scan_likelihood(const mapping::OccupancyGrid& grid, const Pose2& pose, const LaserScan& scan,
                       const LikelihoodParams& params) {
  const mapping::DistanceField field(grid);
  return score_endpoints(grid, field, pose, sample_endpoints(scan, params.beam_stride), params).normalized;
}

namespace {

double trimmed_objective(const mapping::OccupancyGrid& grid, const mapping::DistanceField& field,
                         const Pose2& pose, const std::vector<Eigen::Vector2d>& endpoints,
                         const LikelihoodParams& lik, double trim, std::vector<double>& buf) {
  const double log_floor = std::log(lik.outlier_floor);
  const double inv = 1.0 / (2.0 * lik.sigma_hit * lik.sigma_hit);
  buf.clear();
  for (const auto& e : endpoints) {
    const auto c = grid.world_to_cell(pose.transform(e));
    if (!grid.in_bounds(c) || grid.at(c.x, c.y) == 0.0) continue;
    const double d = field.distance(c.x, c.y);
    buf.push_back(std::max(-d * d * inv, log_floor));
  }
  const auto drop = static_cast<std::size_t>(trim * static_cast<double>(buf.size()));
  if (drop > 0) std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(drop), buf.end());
  double sum = 0.0;
  for (std::size_t i = drop; i < buf.size(); ++i) sum += buf[i];
  return sum;
}

}  // namespace

ClimbResult hill_climb(const mapping::OccupancyGrid& grid, const mapping::DistanceField& field,
                       const Pose2& initial, const std::vector<Eigen::Vector2d>& endpoints,
                       const LikelihoodParams& lik, const ClimbParams& climb) {
  ClimbResult best{initial, {}, 0.0};
  std::vector<double> buf;
  buf.reserve(endpoints.size());
  if (!field.empty() && !endpoints.empty()) {
    best.objective = trimmed_objective(grid, field, initial, endpoints, lik, climb.trim_fraction, buf);
    double lin = climb.linear_step, ang = climb.angular_step;
    int halvings = 0;
    for (int it = 0; it < climb.max_iterations; ++it) {
      const Pose2 moves[6] = {{lin, 0, 0}, {-lin, 0, 0}, {0, lin, 0}, {0, -lin, 0}, {0, 0, ang}, {0, 0, -ang}};
      Pose2 next = best.pose;
      double next_obj = best.objective;
      for (const auto& m : moves) {
        const Pose2 cand{best.pose.x + m.x, best.pose.y + m.y, wrap_angle(best.pose.theta + m.theta)};
        const double obj = trimmed_objective(grid, field, cand, endpoints, lik, climb.trim_fraction, buf);
        if (obj > next_obj) next = cand, next_obj = obj;
      }
      if (next_obj > best.objective) {
        best.pose = next;
        best.objective = next_obj;
        continue;
      }
      if (++halvings > climb.halvings) break;
      lin *= 0.5;
      ang *= 0.5;
    }
  }
  best.score = score_endpoints(grid, field, best.pose, endpoints, lik);
  return best;
}

}  // namespace quadslam::slam
