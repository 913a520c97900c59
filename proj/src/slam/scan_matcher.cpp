#include "quadslam/slam/scan_matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quadslam::slam {

void MatcherConfig::validate() const {
  if (!(window_linear >= 0.0) || !(window_angular >= 0.0)) throw std::invalid_argument("matcher window must be >= 0");
  if (!(coarse_linear > 0.0) || !(coarse_angular > 0.0) || !(fine_linear > 0.0) || !(fine_angular > 0.0))
    throw std::invalid_argument("matcher steps must be > 0");
  if (!(lookup_resolution > 0.0) || !(lookup_sigma > 0.0)) throw std::invalid_argument("invalid lookup raster");
  if (query_stride < 1) throw std::invalid_argument("query_stride must be >= 1");
}

LookupGrid::LookupGrid(const std::vector<Eigen::Vector2d>& points, const std::vector<bool>& link_next,
                       double resolution, double sigma, double margin)
    : inv_res_(1.0 / resolution), res_(resolution) {
  double minx = std::numeric_limits<double>::infinity(), miny = minx;
  double maxx = -minx, maxy = -minx;
  for (const auto& p : points) {
    minx = std::min(minx, p.x());
    miny = std::min(miny, p.y());
    maxx = std::max(maxx, p.x());
    maxy = std::max(maxy, p.y());
  }
  if (points.empty()) return;
  ox_ = minx - margin;
  oy_ = miny - margin;
  w_ = static_cast<int>(std::ceil((maxx - minx + 2 * margin) * inv_res_)) + 1;
  h_ = static_cast<int>(std::ceil((maxy - miny + 2 * margin) * inv_res_)) + 1;
  v_.assign(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_), 0.0);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma * inv_res_));
  for (std::size_t i = 0; i < points.size(); ++i) {
    stamp(points[i], sigma, radius);
    if (i + 1 < points.size() && link_next[i]) {
      const Eigen::Vector2d d = points[i + 1] - points[i];
      const int steps = static_cast<int>(std::ceil(d.norm() / (0.5 * resolution)));
      for (int k = 1; k < steps; ++k) stamp(points[i] + d * (static_cast<double>(k) / steps), sigma, radius);
    }
  }
}

void LookupGrid::stamp(const Eigen::Vector2d& p, double sigma, int radius) {
  const int cx = static_cast<int>(std::floor((p.x() - ox_) * inv_res_));
  const int cy = static_cast<int>(std::floor((p.y() - oy_) * inv_res_));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = std::max(0, cy - radius); y <= std::min(h_ - 1, cy + radius); ++y)
    for (int x = std::max(0, cx - radius); x <= std::min(w_ - 1, cx + radius); ++x) {
      const double dx = ox_ + (x + 0.5) * res_ - p.x();
      const double dy = oy_ + (y + 0.5) * res_ - p.y();
      const double v = (x == cx && y == cy) ? 1.0 : std::exp(-(dx * dx + dy * dy) * inv);
      double& cell = v_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)];
      cell = std::max(cell, v);
    }
}

double correlation_score(const LookupGrid& lookup, const std::vector<Eigen::Vector2d>& pts, const Pose2& pose) {
  if (pts.empty()) return 0.0;
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  double sum = 0.0;
  for (const auto& p : pts) sum += lookup.at({pose.x + c * p.x() - s * p.y(), pose.y + s * p.x() + c * p.y()});
  return sum / static_cast<double>(pts.size());
}

namespace {

struct Candidate {
  Pose2 pose;
  double score{-1.0};
  double rank{-1.0};
};

// Exhaustive search over offsets (i·lin, j·lin, k·ang) from `center`, ranked
// by score times a penalty on the distance from `guess`. Ties keep the
// candidate nearest the guess. The coarse pass reads cells directly, the fine
// pass interpolates.
Candidate search(const LookupGrid& lookup, const std::vector<Eigen::Vector2d>& pts, const Pose2& center,
                 const Pose2& guess, int nl, double lin, int na, double ang, bool interpolate,
                 const MatcherConfig& cfg) {
  Candidate best;
  double best_d = std::numeric_limits<double>::infinity();
  const double wl2 = std::max(cfg.window_linear * cfg.window_linear, 1e-12);
  const double wa2 = std::max(cfg.window_angular * cfg.window_angular, 1e-12);
  std::vector<Eigen::Vector2d> rotated(pts.size());
  for (int k = -na; k <= na; ++k) {
    const double th = wrap_angle(center.theta + k * ang);
    const double c = std::cos(th), s = std::sin(th);
    for (std::size_t i = 0; i < pts.size(); ++i)
      rotated[i] = {c * pts[i].x() - s * pts[i].y(), s * pts[i].x() + c * pts[i].y()};
    const double da = angle_diff(th, guess.theta);
    const double pa = std::max(0.5, 1.0 - cfg.penalty_gain * da * da / wa2);
    for (int j = -nl; j <= nl; ++j)
      for (int i = -nl; i <= nl; ++i) {
        const double x = center.x + i * lin, y = center.y + j * lin;
        double sum = 0.0;
        if (interpolate)
          for (const auto& r : rotated) sum += lookup.at({x + r.x(), y + r.y()});
        else
          for (const auto& r : rotated) sum += lookup.nearest({x + r.x(), y + r.y()});
        const double score = sum / static_cast<double>(rotated.size());
        const double dl2 = (x - guess.x) * (x - guess.x) + (y - guess.y) * (y - guess.y);
        const double rank = score * std::max(0.5, 1.0 - cfg.penalty_gain * dl2 / wl2) * pa;
        const double d = dl2 / wl2 + da * da / wa2;
        if (rank > best.rank || (rank == best.rank && d < best_d)) {
          best = {{x, y, th}, score, rank};
          best_d = d;
        }
      }
  }
  return best;
}

}  // namespace

MatchResult scan_match(const LaserScan& reference, const Pose2& reference_pose, const LaserScan& query,
                       const Pose2& initial, const MatcherConfig& cfg) {
  cfg.validate();
  std::vector<Eigen::Vector2d> ref;
  std::vector<bool> link;
  std::vector<std::size_t> beam;
  for (std::size_t i = 0; i < reference.ranges.size(); ++i)
    if (has_return(reference.ranges[i])) {
      ref.push_back(reference_pose.transform(reference.endpoint(i)));
      beam.push_back(i);
    }
  if (ref.empty()) throw UnusableScan("reference scan has no returns");
  link.assign(ref.size(), false);
  for (std::size_t i = 0; i + 1 < ref.size(); ++i)
    link[i] = beam[i + 1] == beam[i] + 1 && (ref[i + 1] - ref[i]).norm() <= cfg.link_max_gap;

  std::vector<Eigen::Vector2d> pts;
  for (std::size_t i = 0; i < query.ranges.size(); i += static_cast<std::size_t>(cfg.query_stride))
    if (has_return(query.ranges[i])) pts.push_back(query.endpoint(i));
  if (pts.empty()) throw UnusableScan("query scan has no returns");

  const LookupGrid lookup(ref, link, cfg.lookup_resolution, cfg.lookup_sigma,
                          cfg.window_linear + 3.0 * cfg.lookup_sigma + cfg.lookup_resolution);
  const int nl = static_cast<int>(std::floor(cfg.window_linear / cfg.coarse_linear + 1e-9));
  const int na = static_cast<int>(std::floor(cfg.window_angular / cfg.coarse_angular + 1e-9));
  const Candidate coarse = search(lookup, pts, initial, initial, nl, cfg.coarse_linear, na, cfg.coarse_angular, false, cfg);
  const int fl = static_cast<int>(std::floor(cfg.coarse_linear / cfg.fine_linear + 1e-9));
  const int fa = static_cast<int>(std::floor(cfg.coarse_angular / cfg.fine_angular + 1e-9));
  const Candidate fine = search(lookup, pts, coarse.pose, initial, fl, cfg.fine_linear, fa, cfg.fine_angular, true, cfg);
  return {fine.pose, fine.score};
}

}  // namespace quadslam::slam
