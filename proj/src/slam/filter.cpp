#include "quadslam/slam/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace quadslam::slam {

namespace {

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

std::shared_ptr<const TrajectoryNode> extend(std::shared_ptr<const TrajectoryNode> h, double t,
                                             const Pose2& p) {
  return std::make_shared<const TrajectoryNode>(TrajectoryNode{{t, p}, std::move(h)});
}

}  // namespace

void FilterConfig::validate() const {
  if (particle_count < 1) throw std::invalid_argument("particle_count must be >= 1");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
    throw std::invalid_argument("resample_threshold must be in (0, 1]");
  if (match_confidence_min < 0.0 || match_confidence_min > 1.0)
    throw std::invalid_argument("match_confidence_min must be in [0, 1]");
  if (motion.srr < 0 || motion.srt < 0 || motion.str < 0 || motion.stt < 0)
    throw std::invalid_argument("motion noise must be >= 0");
  if (!(likelihood.sigma_hit > 0.0) || !(likelihood.outlier_floor > 0.0) || likelihood.outlier_floor > 1.0)
    throw std::invalid_argument("invalid likelihood parameters");
  if (likelihood.beam_stride < 1) throw std::invalid_argument("beam_stride must be >= 1");
  if (!(resolution > 0.0) || !(initial_extent > 0.0)) throw std::invalid_argument("invalid grid geometry");
}

std::vector<StampedPose> Particle::trajectory() const {
  std::vector<StampedPose> out;
  for (const TrajectoryNode* n = history.get(); n; n = n->parent.get()) out.push_back(n->value);
  std::reverse(out.begin(), out.end());
  return out;
}

FilterState rbpf_init(const FilterConfig& cfg, const Pose2& start, double timestamp) {
  cfg.validate();
  FilterState s{cfg, {}, std::mt19937_64(cfg.seed), 0, {}};
  auto grid = std::make_shared<const mapping::OccupancyGrid>(
      mapping::make_grid_around(start.translation(), cfg.initial_extent, cfg.resolution, cfg.log_odds));
  auto field = std::make_shared<const mapping::DistanceField>(*grid);
  auto history = extend(nullptr, timestamp, start);
  const double w = 1.0 / cfg.particle_count;
  s.particles.assign(static_cast<std::size_t>(cfg.particle_count), Particle{start, w, grid, field, history});
  return s;
}

Pose2 sample_motion(const Pose2& delta, const MotionNoise& n, std::mt19937_64& rng) {
  const double trans = std::hypot(delta.x, delta.y);
  const double rot = std::abs(wrap_angle(delta.theta));
  const double st = n.srr * trans + n.srt * rot;
  const double sr = n.str * trans + n.stt * rot;
  const double dx = gaussian(rng, st);
  const double dy = gaussian(rng, st);
  const double dt = gaussian(rng, sr);
  return {delta.x + dx, delta.y + dy, wrap_angle(delta.theta + dt)};
}

double effective_sample_size(std::span<const Particle> particles) {
  double sq = 0.0;
  for (const auto& p : particles) sq += p.weight * p.weight;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n == 0) return out;
  const double step = 1.0 / static_cast<double>(n);
  double target = u * step, cum = weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (target > cum && i + 1 < n) cum += weights[++i];
    out.push_back(i);
    target += step;
  }
  return out;
}

void rbpf_update(FilterState& s, const Pose2& odom_delta, const LaserScan& scan) {
  const auto& cfg = s.cfg;
  const auto endpoints = sample_endpoints(scan, cfg.likelihood.beam_stride);
  const std::size_t n = s.particles.size();
  UpdateReport report;
  ++s.updates;

  std::vector<double> logw(n), scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = s.particles[i];
    const Pose2 guess = compose(p.pose, sample_motion(odom_delta, cfg.motion, s.rng));
    const auto climbed = hill_climb(*p.grid, *p.field, guess, endpoints, cfg.likelihood, cfg.climb);
    p.pose = climbed.pose;
    p.history = extend(p.history, scan.timestamp, p.pose);
    scores[i] = climbed.score.normalized;
    logw[i] = std::log(p.weight) + climbed.score.log_likelihood;
  }

  const double top = *std::max_element(logw.begin(), logw.end());
  report.lost = endpoints.empty() || !std::isfinite(top);
  if (report.lost) {
    for (auto& p : s.particles) p.weight = 1.0 / static_cast<double>(n);
    report.neff = static_cast<double>(n);
    s.last = report;
    return;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(logw[i] - top);
  for (std::size_t i = 0; i < n; ++i) s.particles[i].weight = std::exp(logw[i] - top) / total;

  report.neff = effective_sample_size(s.particles);
  if (n > 1 && report.neff < cfg.resample_threshold * static_cast<double>(n)) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = s.particles[i].weight;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(s.rng);
    const auto idx = systematic_resample(w, u);
    std::vector<Particle> next;
    std::vector<double> next_scores;
    next.reserve(n);
    for (auto k : idx) {
      next.push_back(s.particles[k]);
      next.back().weight = 1.0 / static_cast<double>(n);
      next_scores.push_back(scores[k]);
    }
    s.particles = std::move(next);
    scores = std::move(next_scores);
    report.resampled = true;
  }

  // Particles that share a grid and pass the gate share the integrated copy.
  std::vector<std::pair<const mapping::OccupancyGrid*, Pose2>> done_keys;
  std::vector<std::size_t> done_index;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = s.particles[i];
    if (scores[i] < cfg.match_confidence_min) continue;
    ++report.integrated;
    const mapping::OccupancyGrid* key = p.grid.get();
    bool reused = false;
    for (std::size_t k = 0; k < done_keys.size(); ++k)
      if (done_keys[k].first == key && done_keys[k].second == p.pose) {
        const auto& src = s.particles[done_index[k]];
        p.grid = src.grid;
        p.field = src.field;
        reused = true;
        break;
      }
    if (reused) continue;
    auto grid = std::make_shared<mapping::OccupancyGrid>(*p.grid);
    mapping::integrate_scan(*grid, p.pose, scan);
    p.field = std::make_shared<const mapping::DistanceField>(*grid);
    p.grid = std::move(grid);
    done_keys.emplace_back(key, p.pose);
    done_index.push_back(i);
  }
  report.best_score = scores[best_index(s)];
  s.last = report;
}

std::size_t best_index(const FilterState& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.particles.size(); ++i)
    if (s.particles[i].weight > s.particles[best].weight) best = i;
  return best;
}

BestMap best_map(const FilterState& s) {
  if (s.particles.empty()) throw std::logic_error("filter has no particles");
  const auto i = best_index(s);
  return {s.particles[i].grid, s.particles[i].trajectory(), i};
}

FilterMapper::FilterMapper(const FilterConfig& cfg, const Pose2& start, Options opt)
    : state_(rbpf_init(cfg, start)), opt_(opt) {}

bool FilterMapper::process(const Pose2& odom_delta, const LaserScan& scan) {
  pending_ = compose(pending_, odom_delta);
  const bool moved = std::hypot(pending_.x, pending_.y) >= opt_.linear_update ||
                     std::abs(pending_.theta) >= opt_.angular_update;
  if (!first_ && !moved) return false;
  first_ = false;
  rbpf_update(state_, pending_, scan);
  pending_ = Pose2::identity();
  return true;
}

Pose2 FilterMapper::pose() const {
  return compose(state_.particles[best_index(state_)].pose, pending_);
}

}  // namespace quadslam::slam
