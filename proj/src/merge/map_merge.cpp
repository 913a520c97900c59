#include "quadslam/merge/map_merge.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>

namespace quadslam::merge {

using mapping::CellClass;
using mapping::OccupancyGrid;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Image {
  int w{0};
  int h{0};
  std::vector<double> v;

  Image(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_), 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)]; }
  double at(int x, int y) const {
    return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  }
  double get(int x, int y) const { return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : at(x, y); }
  double bilinear(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = x - fx, ay = y - fy;
    return (1 - ax) * (1 - ay) * get(x0, y0) + ax * (1 - ay) * get(x0 + 1, y0) + (1 - ax) * ay * get(x0, y0 + 1) +
           ax * ay * get(x0 + 1, y0 + 1);
  }
};

std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& x : k) x /= sum;
  return k;
}

// Separable blur; outside the image counts as zero.
Image blur(const Image& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Image tmp(in.w, in.h), out(in.w, in.h);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * in.get(x + i, y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.get(x, y + i);
      out.at(x, y) = s;
    }
  return out;
}

std::vector<double> ring_descriptor(const Image& occ, const Image& known, double cx, double cy, double orientation,
                                    const FeatureConfig& cfg) {
  const int k = cfg.ring_samples;
  std::vector<double> d;
  d.reserve(cfg.descriptor_length());
  for (int ri = 0; ri < cfg.ring_count; ++ri) {
    const double r = cfg.ring_inner + cfg.ring_step * ri;
    for (int s = 0; s < k; ++s) {
      const double a = orientation + 2.0 * kPi * s / k;
      const double px = cx + r * std::cos(a), py = cy + r * std::sin(a);
      const double kn = known.bilinear(px, py);
      d.push_back(kn >= cfg.known_fraction ? occ.bilinear(px, py) / kn : kNaN);
    }
  }
  return d;
}

int count_inliers(const Pose2& t, std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b,
                  double threshold, std::vector<std::size_t>* which = nullptr) {
  int n = 0;
  if (which) which->clear();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((t.transform(b[i]) - a[i]).norm() <= threshold) {
      ++n;
      if (which) which->push_back(i);
    }
  }
  return n;
}

std::optional<MapTransform> estimate_from_features(const std::vector<MapFeature>& fa, const std::vector<MapFeature>& fb,
                                                   double resolution, const MergeConfig& cfg) {
  const auto matches = match_features(fa, fb, cfg.ratio_test, cfg.features.min_overlap);
  if (matches.size() < 2) return std::nullopt;
  std::vector<Eigen::Vector2d> pa, pb;
  for (const auto& m : matches) {
    pa.push_back(fa[m.a].position);
    pb.push_back(fb[m.b].position);
  }
  const double thr = cfg.inlier_threshold_cells * resolution;
  const auto n = matches.size();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  Pose2 best{};
  int best_inliers = 0;
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j) continue;
    const Eigen::Vector2d va = pa[j] - pa[i], vb = pb[j] - pb[i];
    if (vb.norm() <= thr || std::abs(va.norm() - vb.norm()) > thr) continue;
    const double theta = wrap_angle(std::atan2(va.y(), va.x()) - std::atan2(vb.y(), vb.x()));
    const Eigen::Vector2d ma = 0.5 * (pa[i] + pa[j]), mb = 0.5 * (pb[i] + pb[j]);
    Pose2 hyp{0.0, 0.0, theta};
    const Eigen::Vector2d t = ma - hyp.rotation() * mb;
    hyp.x = t.x();
    hyp.y = t.y();
    const int inl = count_inliers(hyp, pa, pb, thr);
    if (inl > best_inliers) {
      best_inliers = inl;
      best = hyp;
      if (inl >= cfg.early_exit_ratio * static_cast<double>(n)) break;
    }
  }
  if (best_inliers < 2) return std::nullopt;

  std::vector<std::size_t> idx;
  for (int round = 0; round < 2; ++round) {
    count_inliers(best, pa, pb, thr, &idx);
    if (idx.size() < 2) break;
    std::vector<Eigen::Vector2d> ia, ib;
    for (auto k : idx) {
      ia.push_back(pa[k]);
      ib.push_back(pb[k]);
    }
    const Pose2 refined = fit_rigid(ia, ib);
    if (count_inliers(refined, pa, pb, thr) < static_cast<int>(idx.size())) break;
    best = refined;
  }
  MapTransform out;
  out.transform = best;
  out.inlier_count = count_inliers(best, pa, pb, thr);
  out.matched_count = static_cast<int>(n);
  out.confidence = static_cast<double>(out.inlier_count) / static_cast<double>(n);
  if (out.confidence < cfg.min_confidence || out.inlier_count < cfg.min_inliers) return std::nullopt;
  return out;
}

const OccupancyGrid& at_resolution(const OccupancyGrid& g, double res, std::optional<OccupancyGrid>& storage) {
  if (g.resolution() == res) return g;
  storage = transform_grid(g, Pose2::identity(), res);
  return *storage;
}

}  // namespace

std::vector<MapFeature> extract_features(const OccupancyGrid& grid, const FeatureConfig& cfg) {
  const int w = grid.width(), h = grid.height();
  if (w < 3 || h < 3) return {};
  Image occ(w, h), known(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      switch (grid.classify(x, y)) {
        case CellClass::Occupied:
          occ.at(x, y) = 1.0;
          known.at(x, y) = 1.0;
          break;
        case CellClass::Free:
          known.at(x, y) = 1.0;
          break;
        case CellClass::Unknown:
          break;
      }
    }
  const Image smooth = blur(occ, cfg.blur_sigma);
  const Image occ_wide = blur(occ, cfg.descriptor_sigma);
  const Image known_wide = blur(known, cfg.descriptor_sigma);

  Image gxx(w, h), gxy(w, h), gyy(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto s = [&](int dx, int dy) { return smooth.get(x + dx, y + dy); };
      const double gx = (s(1, -1) + 2 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2 * s(-1, 0) + s(-1, 1));
      const double gy = (s(-1, 1) + 2 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2 * s(0, -1) + s(1, -1));
      gxx.at(x, y) = gx * gx;
      gxy.at(x, y) = gx * gy;
      gyy.at(x, y) = gy * gy;
    }
  const Image a = blur(gxx, cfg.tensor_sigma), b = blur(gxy, cfg.tensor_sigma), c = blur(gyy, cfg.tensor_sigma);
  Image resp(w, h);
  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double tr = 0.5 * (a.at(x, y) + c.at(x, y));
      const double dd = 0.5 * (a.at(x, y) - c.at(x, y));
      const double lmin = tr - std::sqrt(dd * dd + b.at(x, y) * b.at(x, y));
      resp.at(x, y) = lmin;
      peak = std::max(peak, lmin);
    }
  const double threshold = std::max(cfg.min_response, cfg.quality_level * peak);

  std::vector<MapFeature> out;
  const int r = cfg.nms_radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = resp.at(x, y);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const double u = resp.at(nx, ny);
          // Plateaus keep their first cell in row-major order.
          const bool earlier = ny < y || (ny == y && nx < x);
          if (u > v || (earlier && u == v)) {
            is_max = false;
            break;
          }
        }
      if (!is_max) continue;

      MapFeature f;
      // Sub-cell peak from a parabola through the response neighbours.
      const auto offset = [](double l, double c, double r) {
        const double den = l - 2.0 * c + r;
        return den < 0.0 ? std::clamp(0.5 * (l - r) / den, -0.5, 0.5) : 0.0;
      };
      const double sx = x + offset(resp.get(x - 1, y), v, resp.get(x + 1, y));
      const double sy = y + offset(resp.get(x, y - 1), v, resp.get(x, y + 1));
      double mx = 0.0, my = 0.0;
      const int orad = cfg.orientation_radius;
      for (int dy = -orad; dy <= orad; ++dy)
        for (int dx = -orad; dx <= orad; ++dx) {
          if (dx * dx + dy * dy > orad * orad) continue;
          const double m = smooth.bilinear(sx + dx, sy + dy);
          mx += m * dx;
          my += m * dy;
        }
      const double local_orientation = (mx == 0.0 && my == 0.0) ? 0.0 : std::atan2(my, mx);
      f.orientation = wrap_angle(local_orientation + grid.origin().theta);
      f.position = grid.origin().transform(Eigen::Vector2d((sx + 0.5) * grid.resolution(), (sy + 0.5) * grid.resolution()));
      f.descriptor = ring_descriptor(occ_wide, known_wide, sx, sy, local_orientation, cfg);
      out.push_back(std::move(f));
    }
  return out;
}

double descriptor_distance(const std::vector<double>& a, const std::vector<double>& b, double min_overlap) {
  const std::size_t n = std::min(a.size(), b.size());
  double s = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    s += (a[i] - b[i]) * (a[i] - b[i]);
    ++used;
  }
  if (used == 0 || static_cast<double>(used) < min_overlap * static_cast<double>(std::max(a.size(), b.size())))
    return std::numeric_limits<double>::infinity();
  return std::sqrt(s / static_cast<double>(used));
}

std::vector<FeatureMatch> match_features(const std::vector<MapFeature>& a, const std::vector<MapFeature>& b,
                                         double ratio, double min_overlap) {
  std::vector<FeatureMatch> out;
  if (a.empty() || b.empty()) return out;
  std::vector<std::size_t> best_b_for_a(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = descriptor_distance(a[i].descriptor, b[j].descriptor, min_overlap);
      if (d < best) {
        best = d;
        best_b_for_a[i] = j;
      }
    }
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = descriptor_distance(a[i].descriptor, b[j].descriptor, min_overlap);
      if (d < d1) {
        d2 = d1;
        d1 = d;
        arg = i;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (!std::isfinite(d1) || best_b_for_a[arg] != j) continue;
    if (std::isfinite(d2) && !(d1 < ratio * d2)) continue;
    out.push_back({arg, j, d1});
  }
  return out;
}

Pose2 fit_rigid(std::span<const Eigen::Vector2d> a, std::span<const Eigen::Vector2d> b) {
  if (a.empty() || a.size() != b.size()) throw MergeError("fit_rigid needs equally sized non-empty point sets");
  Eigen::Vector2d ma = Eigen::Vector2d::Zero(), mb = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sxy = 0.0, sdot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Eigen::Vector2d p = b[i] - mb, q = a[i] - ma;
    sdot += p.dot(q);
    sxy += p.x() * q.y() - p.y() * q.x();
  }
  Pose2 t{0.0, 0.0, std::atan2(sxy, sdot)};
  const Eigen::Vector2d tr = ma - t.rotation() * mb;
  t.x = tr.x();
  t.y = tr.y();
  return t;
}

std::optional<MapTransform> estimate_transform(const OccupancyGrid& a, const OccupancyGrid& b, const MergeConfig& cfg) {
  std::optional<OccupancyGrid> tmp;
  const OccupancyGrid& bb = at_resolution(b, a.resolution(), tmp);
  return estimate_from_features(extract_features(a, cfg.features), extract_features(bb, cfg.features), a.resolution(),
                                cfg);
}

OccupancyGrid transform_grid(const OccupancyGrid& src, const Pose2& motion, double resolution) {
  if (!(resolution > 0.0)) throw MergeError("resolution must be positive");
  const double W = src.width() * src.resolution(), H = src.height() * src.resolution();
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const Eigen::Vector2d& corner : {Eigen::Vector2d(0, 0), Eigen::Vector2d(W, 0), Eigen::Vector2d(0, H),
                                       Eigen::Vector2d(W, H)}) {
    const Eigen::Vector2d p = motion.transform(src.origin().transform(corner));
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
  const int w = std::max(1, static_cast<int>(std::ceil((x1 - x0) / resolution - 1e-9)));
  const int h = std::max(1, static_cast<int>(std::ceil((y1 - y0) / resolution - 1e-9)));
  OccupancyGrid out(resolution, w, h, Pose2{x0, y0, 0.0}, src.params());
  const Pose2 back = inverse(motion);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto c = src.world_to_cell(back.transform(out.cell_center(x, y)));
      if (src.in_bounds(c)) out.set(x, y, src.at(c.x, c.y));
    }
  return out;
}

MergeResult merge_maps(std::span<const OccupancyGrid> grids, const MergeConfig& cfg) {
  if (grids.empty()) throw MergeError("merge_maps needs at least one map");
  const OccupancyGrid& anchor = grids[0];
  const double res = anchor.resolution();
  const std::size_t n = grids.size();

  std::vector<std::optional<OccupancyGrid>> storage(n);
  std::vector<const OccupancyGrid*> maps(n);
  std::vector<std::vector<MapFeature>> feats(n);
  for (std::size_t i = 0; i < n; ++i) {
    maps[i] = &at_resolution(grids[i], res, storage[i]);
    if (n > 1) feats[i] = extract_features(*maps[i], cfg.features);
  }

  MergeResult result;
  result.transforms.assign(n, std::nullopt);
  result.transforms[0] = MapTransform{Pose2::identity(), 0, 0, 1.0};
  for (std::size_t i = 1; i < n; ++i) result.transforms[i] = estimate_from_features(feats[0], feats[i], res, cfg);

  // Maps that do not overlap the anchor may still chain through another map.
  for (bool progress = true; progress;) {
    progress = false;
    for (std::size_t i = 1; i < n; ++i) {
      if (result.transforms[i]) continue;
      for (std::size_t j = 1; j < n; ++j) {
        if (j == i || !result.transforms[j]) continue;
        const auto via = estimate_from_features(feats[j], feats[i], res, cfg);
        if (!via) continue;
        MapTransform t = *via;
        t.transform = compose(result.transforms[j]->transform, via->transform);
        t.inlier_count = std::min(via->inlier_count, result.transforms[j]->inlier_count);
        t.confidence = std::min(via->confidence, result.transforms[j]->confidence);
        result.transforms[i] = t;
        progress = true;
        break;
      }
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 1; i < n; ++i) {
    if (result.transforms[i])
      order.push_back(i);
    else
      result.excluded.push_back(i);
  }
  // Fixed summation order keyed on content, so input order cannot change rounding.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const auto& gl = *maps[l];
    const auto& gr = *maps[r];
    if (gl.width() != gr.width()) return gl.width() < gr.width();
    if (gl.height() != gr.height()) return gl.height() < gr.height();
    return gl.data() < gr.data();
  });
  order.insert(order.begin(), 0);

  // Extent in the anchor's grid frame, snapped to its lattice.
  const Pose2 to_local = inverse(anchor.origin());
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (auto i : order) {
    const auto& g = *maps[i];
    const double W = g.width() * g.resolution(), H = g.height() * g.resolution();
    for (const Eigen::Vector2d& corner : {Eigen::Vector2d(0, 0), Eigen::Vector2d(W, 0), Eigen::Vector2d(0, H),
                                         Eigen::Vector2d(W, H)}) {
      const Eigen::Vector2d p =
          to_local.transform(result.transforms[i]->transform.transform(g.origin().transform(corner)));
      x0 = std::min(x0, p.x());
      y0 = std::min(y0, p.y());
      x1 = std::max(x1, p.x());
      y1 = std::max(y1, p.y());
    }
  }
  const int ix0 = static_cast<int>(std::floor(x0 / res + 1e-9));
  const int iy0 = static_cast<int>(std::floor(y0 / res + 1e-9));
  const int ix1 = static_cast<int>(std::ceil(x1 / res - 1e-9));
  const int iy1 = static_cast<int>(std::ceil(y1 / res - 1e-9));
  const Eigen::Vector2d o = anchor.origin().transform(Eigen::Vector2d(ix0 * res, iy0 * res));
  OccupancyGrid out(res, std::max(1, ix1 - ix0), std::max(1, iy1 - iy0), Pose2{o.x(), o.y(), anchor.origin().theta},
                    anchor.params());

  std::vector<Pose2> back(n);
  for (auto i : order) back[i] = inverse(result.transforms[i]->transform);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const Eigen::Vector2d p = out.cell_center(x, y);
      double sum = 0.0;
      for (auto i : order) {
        const auto& g = *maps[i];
        const auto c = g.world_to_cell(back[i].transform(p));
        if (g.in_bounds(c)) sum += g.at(c.x, c.y);
      }
      out.set(x, y, sum);
    }
  result.merged = std::move(out);
  return result;
}

}  // namespace quadslam::merge
