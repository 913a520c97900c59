#include <doctest.h>

#include "quadslam/slam/filter.hpp"
#include "quadslam/world/simulator.hpp"
#include "support/oracles.hpp"
#include "support/sim_drive.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <numeric>

using namespace quadslam;
using namespace quadslam::slam;
using mapping::CellClass;

namespace {

world::Environment square_room() { return world::load_environment(QUADSLAM_DATA_DIR "/envs/square4.env"); }

LaserScan scan_at(const world::Environment& env, const Pose2& pose) {
  world::Rng rng(0);
  return world::simulate_scan(env, pose, LidarConfig{}, world::NoiseModel::zero(), rng, 0.0);
}

double weight_sum(const FilterState& s) {
  double t = 0.0;
  for (const auto& p : s.particles) t += p.weight;
  return t;
}

FilterConfig exact_config() {
  FilterConfig cfg;
  cfg.particle_count = 1;
  cfg.motion = {0, 0, 0, 0};
  return cfg;
}

}  // namespace

TEST_CASE("rbpf_init") {
  FilterConfig cfg;
  cfg.particle_count = 1;
  auto one = rbpf_init(cfg, {1, 2, 0.5});
  REQUIRE(one.particles.size() == 1);
  CHECK(one.particles[0].weight == 1.0);
  CHECK(one.particles[0].pose == Pose2{1, 2, 0.5});

  cfg.particle_count = 30;
  const auto s = rbpf_init(cfg, {});
  REQUIRE(s.particles.size() == 30);
  for (const auto& p : s.particles) {
    CHECK(p.weight == doctest::Approx(1.0 / 30));
    CHECK(p.grid->count(CellClass::Occupied) == 0);
    CHECK(p.grid->count(CellClass::Free) == 0);
  }
  cfg.particle_count = 0;
  CHECK_THROWS(rbpf_init(cfg, {}));
}

TEST_CASE("scan_likelihood examples") {
  const auto env = square_room();
  const Pose2 truth{0.3, -0.2, 0.2};
  const auto scan = scan_at(env, truth);
  const auto empty = mapping::make_grid_around({0, 0}, 5.0, 0.05);
  CHECK(scan_likelihood(empty, truth, scan) == 1.0);

  // Mark exactly the cells that contain endpoints.
  auto marked = empty;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (!has_return(scan.ranges[i])) continue;
    const auto c = marked.world_to_cell(truth.transform(scan.endpoint(i)));
    marked.set(c.x, c.y, 2.0);
  }
  CHECK(scan_likelihood(marked, truth, scan) == 1.0);

  auto mapped = empty;
  mapping::integrate_scan(mapped, truth, scan);
  const double at_truth = scan_likelihood(mapped, truth, scan);
  CHECK(scan_likelihood(mapped, {truth.x + 0.5, truth.y, truth.theta}, scan) < at_truth);
  CHECK(scan_likelihood(mapped, {truth.x, truth.y - 0.5, truth.theta}, scan) < at_truth);

  // Argmax over a grid of candidate poses sits at the truth.
  Pose2 arg;
  double best = -1.0;
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j)
      for (int k = -3; k <= 3; ++k) {
        const Pose2 p{truth.x + 0.1 * i, truth.y + 0.1 * j, truth.theta + 0.05 * k};
        const double sc = scan_likelihood(mapped, p, scan);
        if (sc > best) best = sc, arg = p;
      }
  CHECK(arg.x == doctest::Approx(truth.x));
  CHECK(arg.y == doctest::Approx(truth.y));
  CHECK(arg.theta == doctest::Approx(truth.theta));
  CHECK(best > 0.0);
  CHECK(best <= 1.0);
}

TEST_CASE("identical scans with identity odometry keep weights uniform") {
  const auto env = square_room();
  FilterConfig cfg;
  cfg.particle_count = 12;
  auto s = rbpf_init(cfg, {0.2, 0.1, 0.0});
  const auto scan = scan_at(env, {0.2, 0.1, 0.0});
  for (int i = 0; i < 4; ++i) {
    rbpf_update(s, Pose2::identity(), scan);
    CHECK_FALSE(s.last.resampled);
    CHECK(s.last.neff == doctest::Approx(12.0));
    for (const auto& p : s.particles) CHECK(p.weight == doctest::Approx(1.0 / 12));
  }
}

TEST_CASE("confidence gate leaves the grid untouched") {
  const auto env = square_room();
  auto s = rbpf_init(exact_config(), {});
  rbpf_update(s, Pose2::identity(), scan_at(env, {}));
  CHECK(s.last.integrated == 1);
  const auto before = s.particles[0].grid;
  const auto snapshot = *before;

  // A much smaller room seen from the same spot: endpoints land deep in free space.
  const world::Environment tiny({{{-0.5, -0.5}, {0.5, -0.5}}, {{0.5, -0.5}, {0.5, 0.5}},
                                 {{0.5, 0.5}, {-0.5, 0.5}}, {{-0.5, 0.5}, {-0.5, -0.5}}});
  rbpf_update(s, Pose2::identity(), scan_at(tiny, {}));
  CHECK(s.last.best_score < s.cfg.match_confidence_min);
  CHECK(s.last.integrated == 0);
  CHECK(s.particles[0].grid == before);
  CHECK(*s.particles[0].grid == snapshot);
}

TEST_CASE("scan without returns is treated as lost tracking") {
  FilterConfig cfg;
  cfg.particle_count = 5;
  auto s = rbpf_init(cfg, {});
  LaserScan blank = scan_at(square_room(), {});
  std::fill(blank.ranges.begin(), blank.ranges.end(), kNoReturn);
  const auto grid = s.particles[0].grid;
  rbpf_update(s, {0.1, 0, 0}, blank);
  CHECK(s.last.lost);
  CHECK(s.particles[0].grid == grid);
  for (const auto& p : s.particles) CHECK(p.weight == doctest::Approx(0.2));
}

TEST_CASE("best_map argmax and tie-break") {
  FilterConfig cfg;
  cfg.particle_count = 3;
  auto s = rbpf_init(cfg, {});
  CHECK(best_map(s).index == 0);
  s.particles[0].weight = 0.1;
  s.particles[1].weight = 0.7;
  s.particles[2].weight = 0.2;
  auto alt = std::make_shared<const mapping::OccupancyGrid>(0.05, 3, 3, Pose2{});
  s.particles[1].grid = alt;
  const auto b = best_map(s);
  CHECK(b.index == 1);
  CHECK(b.grid == alt);
  cfg.particle_count = 1;
  CHECK(best_map(rbpf_init(cfg, {})).trajectory.size() == 1);
}

TEST_CASE("systematic resampling multiplicities follow the weights") {
  const std::vector<double> w{0.05, 0.3, 0.1, 0.25, 0.02, 0.18, 0.1};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> counts(w.size(), 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto idx = systematic_resample(w, u(rng));
    REQUIRE(idx.size() == w.size());
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    for (auto i : idx) counts[i] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double expect = trials * static_cast<double>(w.size()) * w[i];
    chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
  }
  const boost::math::chi_squared dist(static_cast<double>(w.size() - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p > 0.01);
  // Deterministic multiplicities bracket N·w.
  const auto idx = systematic_resample(w, 0.5);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto c = static_cast<double>(std::count(idx.begin(), idx.end(), i));
    CHECK(std::abs(c - 7.0 * w[i]) < 1.0);
  }
}

TEST_CASE("noisy run: weights normalized, log-odds bounded, deterministic") {
  const auto env = world::load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  world::NoiseModel noise;
  const auto frames = testsim::drive(env, {2.0, 2.0, 0.0}, {{3.5, 2.0}, {3.5, 3.2}}, noise);
  FilterConfig cfg;
  cfg.particle_count = 8;
  auto run = [&] {
    auto s = rbpf_init(cfg, frames[0].truth);
    for (const auto& f : frames) {
      rbpf_update(s, f.odom_delta, f.scan);
      CHECK(weight_sum(s) == doctest::Approx(1.0).epsilon(1e-9));
      for (const auto& p : s.particles) CHECK(p.weight >= 0.0);
    }
    return s;
  };
  const auto a = run();
  const auto b = run();
  for (const auto& p : a.particles)
    for (double v : p.grid->data()) {
      CHECK(v >= cfg.log_odds.min);
      CHECK(v <= cfg.log_odds.max);
    }
  REQUIRE(a.particles.size() == b.particles.size());
  for (std::size_t i = 0; i < a.particles.size(); ++i) {
    CHECK(a.particles[i].pose == b.particles[i].pose);
    CHECK(a.particles[i].weight == b.particles[i].weight);
    CHECK(*a.particles[i].grid == *b.particles[i].grid);
  }
  const auto best = best_map(a);
  CHECK(best.trajectory.size() == frames.size() + 1);
  const auto& last = best.trajectory.back().pose;
  CHECK(std::hypot(last.x - frames.back().truth.x, last.y - frames.back().truth.y) < 0.3);
}

TEST_CASE("zero noise, one particle: map equals known-pose ray-trace oracle") {
  const auto env = world::load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  const auto frames = testsim::drive(env, {2.0, 2.0, 0.0}, {{4.0, 2.0}, {4.0, 6.5}, {3.0, 6.5}},
                                     world::NoiseModel::zero());
  auto s = rbpf_init(exact_config(), frames[0].truth);
  std::vector<std::pair<Pose2, LaserScan>> known;
  for (const auto& f : frames) {
    rbpf_update(s, f.odom_delta, f.scan);
    REQUIRE(s.last.integrated == 1);
    known.emplace_back(f.truth, f.scan);
  }
  const auto& p = s.particles[0];
  CHECK(std::hypot(p.pose.x - frames.back().truth.x, p.pose.y - frames.back().truth.y) < 1e-9);
  const auto& g = *p.grid;
  const auto expect = oracle::raytrace_map(known, g.origin().translation(), g.resolution());
  std::size_t mismatched = 0, occupied = 0;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const auto it = expect.find({x, y});
      const double want = it == expect.end() ? 0.0 : it->second;
      mismatched += g.classify(x, y) != g.classify(want);
      occupied += g.classify(x, y) == CellClass::Occupied;
    }
  CHECK(mismatched == 0);
  CHECK(occupied > 200);
}

TEST_CASE("FilterMapper waits for enough motion") {
  const auto env = square_room();
  FilterConfig cfg;
  cfg.particle_count = 4;
  FilterMapper m(cfg);
  const auto scan = scan_at(env, {});
  CHECK(m.process(Pose2::identity(), scan));
  CHECK_FALSE(m.process({0.05, 0, 0}, scan));
  CHECK_FALSE(m.process({0.05, 0, 0}, scan));
  CHECK(m.pose().x == doctest::Approx(0.1).epsilon(0.5));
  CHECK(m.process({0.06, 0, 0}, scan));
  CHECK(m.updates() == 2);
}

TEST_CASE("hill climb pulls a perturbed guess back toward the truth") {
  const auto env = world::load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  const Pose2 truth{3.0, 2.5, 0.3};
  auto grid = mapping::make_grid_around(truth.translation(), 8.0, 0.05);
  for (const Pose2 p : {truth, Pose2{2.5, 3.0, -0.5}, Pose2{3.6, 2.0, 1.5}}) mapping::integrate_scan(grid, p, scan_at(env, p));
  const mapping::DistanceField field(grid);
  const auto pts = sample_endpoints(scan_at(env, truth), 4);
  const LikelihoodParams lik;
  for (const Pose2 off : {Pose2{0.1, 0.0, 0.0}, Pose2{-0.07, 0.08, 0.0}, Pose2{0.0, 0.0, 0.08}, Pose2{0.06, -0.06, -0.06}}) {
    const Pose2 guess{truth.x + off.x, truth.y + off.y, truth.theta + off.theta};
    const auto r = hill_climb(grid, field, guess, pts, lik, ClimbParams{});
    CHECK(std::hypot(r.pose.x - truth.x, r.pose.y - truth.y) < 0.05);
    CHECK(std::abs(angle_diff(r.pose.theta, truth.theta)) < deg2rad(2.0));
    CHECK(r.score.normalized > score_endpoints(grid, field, guess, pts, lik).normalized);
  }
}
