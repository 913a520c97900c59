#include "quadslam/world/environment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace quadslam::world {

Environment::Environment(std::vector<Segment> walls) : walls_(std::move(walls)) {
  if (walls_.empty()) throw EnvironmentError("environment has no walls");
  bounds_.min = walls_.front().a;
  bounds_.max = walls_.front().a;
  for (std::size_t i = 0; i < walls_.size(); ++i) {
    const auto& s = walls_[i];
    if (!(s.length() > 0.0))
      throw EnvironmentError("wall " + std::to_string(i) + " has zero length");
    for (const auto& p : {s.a, s.b}) {
      bounds_.min = bounds_.min.cwiseMin(p);
      bounds_.max = bounds_.max.cwiseMax(p);
    }
  }
}

std::optional<double> Environment::raycast(const Eigen::Vector2d& origin, double angle) const {
  const Eigen::Vector2d dir{std::cos(angle), std::sin(angle)};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : walls_) {
    const Eigen::Vector2d e = s.b - s.a;
    const double denom = dir.x() * e.y() - dir.y() * e.x();
    if (denom == 0.0) continue;  // parallel
    const Eigen::Vector2d w = s.a - origin;
    const double t = (w.x() * e.y() - w.y() * e.x()) / denom;
    const double u = (w.x() * dir.y() - w.y() * dir.x()) / denom;
    if (t >= 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
  }
  if (best == std::numeric_limits<double>::infinity()) return std::nullopt;
  return best;
}

double point_segment_distance(const Eigen::Vector2d& p, const Segment& s) {
  const Eigen::Vector2d e = s.b - s.a;
  const double t = std::clamp((p - s.a).dot(e) / e.squaredNorm(), 0.0, 1.0);
  return (s.a + t * e - p).norm();
}

double Environment::distance_to_walls(const Eigen::Vector2d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : walls_) best = std::min(best, point_segment_distance(p, s));
  return best;
}

Environment parse_environment(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Segment> walls;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x1, y1, x2, y2;
    if (!(ls >> x1 >> y1 >> x2 >> y2))
      throw EnvironmentError("line " + std::to_string(lineno) + ": expected `x1 y1 x2 y2`");
    std::string extra;
    if (ls >> extra)
      throw EnvironmentError("line " + std::to_string(lineno) + ": trailing token '" + extra + "'");
    if (x1 == x2 && y1 == y2)
      throw EnvironmentError("line " + std::to_string(lineno) + ": zero-length segment");
    walls.push_back({{x1, y1}, {x2, y2}});
  }
  if (walls.empty()) throw EnvironmentError("environment file contains no segments");
  return Environment(std::move(walls));
}

Environment load_environment(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw EnvironmentError("cannot open environment file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_environment(ss.str());
}

}  // namespace quadslam::world
