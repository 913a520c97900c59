#include "quadslam/mapping/occupancy_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace quadslam::mapping {

OccupancyGrid::OccupancyGrid(double resolution, int width, int height, const Pose2& origin,
                             LogOddsParams params)
    : resolution_(resolution), width_(width), height_(height), origin_(origin), params_(params) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be > 0");
  if (width < 0 || height < 0) throw std::invalid_argument("grid dimensions must be >= 0");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
}

void OccupancyGrid::set(int ix, int iy, double v) {
  cells_[index(ix, iy)] = std::clamp(v, params_.min, params_.max);
}

std::size_t OccupancyGrid::count(CellClass c) const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [&](double v) { return classify(v) == c; }));
}

Eigen::Vector2d OccupancyGrid::to_local(const Eigen::Vector2d& p) const {
  const double c = std::cos(origin_.theta), s = std::sin(origin_.theta);
  const double dx = p.x() - origin_.x, dy = p.y() - origin_.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

CellIndex OccupancyGrid::world_to_cell(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d l = to_local(p);
  return {static_cast<int>(std::floor(l.x() / resolution_)),
          static_cast<int>(std::floor(l.y() / resolution_))};
}

Eigen::Vector2d OccupancyGrid::cell_center(int ix, int iy) const {
  return origin_.transform({(ix + 0.5) * resolution_, (iy + 0.5) * resolution_});
}

void OccupancyGrid::grow_to_include(const Eigen::Vector2d& p, int margin) {
  const CellIndex c = world_to_cell(p);
  int add_left = 0, add_right = 0, add_down = 0, add_up = 0;
  int w = std::max(width_, 1), h = std::max(height_, 1);
  int cx = c.x, cy = c.y;
  while (cx < margin) {
    add_left += w;
    cx += w;
    w *= 2;
  }
  while (cx >= w - margin) {
    add_right += w;
    w *= 2;
  }
  while (cy < margin) {
    add_down += h;
    cy += h;
    h *= 2;
  }
  while (cy >= h - margin) {
    add_up += h;
    h *= 2;
  }
  if (add_left + add_right + add_down + add_up == 0) return;

  const int nw = width_ + add_left + add_right;
  const int nh = height_ + add_down + add_up;
  std::vector<double> next(static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh), 0.0);
  for (int iy = 0; iy < height_; ++iy)
    std::copy_n(cells_.begin() + static_cast<std::ptrdiff_t>(index(0, iy)), width_,
                next.begin() + static_cast<std::ptrdiff_t>(
                                   static_cast<std::size_t>(iy + add_down) * static_cast<std::size_t>(nw) +
                                   static_cast<std::size_t>(add_left)));
  const Eigen::Vector2d shifted =
      origin_.transform({-add_left * resolution_, -add_down * resolution_});
  origin_.x = shifted.x();
  origin_.y = shifted.y();
  width_ = nw;
  height_ = nh;
  cells_ = std::move(next);
}

std::vector<CellClass> OccupancyGrid::ternary() const {
  std::vector<CellClass> out(cells_.size());
  std::transform(cells_.begin(), cells_.end(), out.begin(), [&](double v) { return classify(v); });
  return out;
}

OccupancyGrid make_grid_around(const Eigen::Vector2d& center, double size_m, double resolution,
                               LogOddsParams params) {
  // Odd cell count puts `center` on a cell center, keeping walls at round
  // coordinates away from cell edges.
  const int n = static_cast<int>(std::ceil(size_m / resolution)) | 1;
  return OccupancyGrid(resolution, n, n,
                       {center.x() - n * resolution / 2.0, center.y() - n * resolution / 2.0, 0.0},
                       params);
}

std::vector<CellIndex> bresenham(CellIndex a, CellIndex b) {
  std::vector<CellIndex> out;
  int x0 = a.x, y0 = a.y;
  const int dx = std::abs(b.x - x0), dy = -std::abs(b.y - y0);
  const int sx = x0 < b.x ? 1 : -1, sy = y0 < b.y ? 1 : -1;
  int err = dx + dy;
  out.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
  while (true) {
    out.push_back({x0, y0});
    if (x0 == b.x && y0 == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return out;
}

void integrate_scan(OccupancyGrid& grid, const Pose2& sensor_pose, const LaserScan& scan) {
  const Eigen::Vector2d origin = sensor_pose.translation();
  std::vector<Eigen::Vector2d> ends;
  ends.reserve(scan.ranges.size());
  grid.grow_to_include(origin);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (!has_return(scan.ranges[i])) continue;
    ends.push_back(sensor_pose.transform(scan.endpoint(i)));
    grid.grow_to_include(ends.back());
  }
  const CellIndex start = grid.world_to_cell(origin);
  const auto& p = grid.params();
  for (const auto& e : ends) {
    const auto cells = bresenham(start, grid.world_to_cell(e));
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) grid.add(cells[k].x, cells[k].y, p.miss);
    grid.add(cells.back().x, cells.back().y, p.hit);
  }
}

namespace {

// 1-D squared distance transform of sampled function f (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;  // z[0] is -inf, so k stays >= 0
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

DistanceField::DistanceField(const OccupancyGrid& grid)
    : width_(grid.width()), height_(grid.height()), resolution_(grid.resolution()) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  sq_.assign(grid.cell_count(), inf);
  const auto& cells = grid.data();
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i] > 0.0) {
      sq_[i] = 0.0;
      empty_ = false;
    }
  if (empty_) return;

  const int n = std::max(width_, height_);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);

  f.resize(static_cast<std::size_t>(width_));
  d.resize(static_cast<std::size_t>(width_));
  for (int y = 0; y < height_; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * static_cast<std::size_t>(width_);
    std::copy_n(sq_.begin() + static_cast<std::ptrdiff_t>(row), width_, f.begin());
    edt_1d(f, d, v, z);
    std::copy(d.begin(), d.end(), sq_.begin() + static_cast<std::ptrdiff_t>(row));
  }
  f.resize(static_cast<std::size_t>(height_));
  d.resize(static_cast<std::size_t>(height_));
  for (int x = 0; x < width_; ++x) {
    for (int y = 0; y < height_; ++y)
      f[static_cast<std::size_t>(y)] = sq_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
    edt_1d(f, d, v, z);
    for (int y = 0; y < height_; ++y)
      sq_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] = d[static_cast<std::size_t>(y)];
  }
}

double DistanceField::distance(int ix, int iy) const {
  if (ix < 0 || iy < 0 || ix >= width_ || iy >= height_) return std::numeric_limits<double>::infinity();
  return std::sqrt(sq_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(ix)]) *
         resolution_;
}

}  // namespace quadslam::mapping
