#include <doctest.h>

#include "quadslam/world/environment.hpp"
#include "quadslam/world/simulator.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace quadslam;
using namespace quadslam::world;

namespace {

const char* kSquare = "-2 -2 2 -2\n2 -2 2 2\n2 2 -2 2\n-2 2 -2 -2\n";

Environment asymmetric_room() {
  return parse_environment(
      "0 0 6 0\n6 0 6 2\n6 2 4 4.5\n4 4.5 0 4\n0 4 0 0\n"
      "1.2 1.0 1.8 1.3\n1.8 1.3 1.5 2.0\n");
}

}  // namespace

TEST_CASE("load_environment: square room") {
  const auto env = parse_environment(kSquare);
  CHECK(env.walls().size() == 4);
  CHECK(env.bounds().width() == doctest::Approx(4.0));
  CHECK(env.bounds().height() == doctest::Approx(4.0));
}

TEST_CASE("load_environment: errors") {
  CHECK_THROWS_AS(parse_environment("1 1 1 1\n"), EnvironmentError);
  CHECK_THROWS_AS(parse_environment("# nothing here\n\n"), EnvironmentError);
  CHECK_THROWS_AS(parse_environment("0 0 1\n"), EnvironmentError);
  CHECK_THROWS_AS(parse_environment("0 0 1 1 extra\n"), EnvironmentError);
  CHECK_THROWS_AS(load_environment("/nonexistent/file.env"), EnvironmentError);
}

TEST_CASE("load_environment: office fixture") {
  const auto env = load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  CHECK(env.walls().size() == 14);
  CHECK(env.bounds().width() == doctest::Approx(10.0));
  CHECK(env.bounds().height() == doctest::Approx(8.0));
}

TEST_CASE("step_true_pose: free-space integration") {
  const auto env = parse_environment("100 100 101 100\n");
  auto p = step_true_pose(env, {0, 0, 0}, {0.1, 0, 0}, 1.0);
  CHECK(p.x == doctest::Approx(0.1));
  CHECK(p.y == doctest::Approx(0.0));
  CHECK(p.theta == doctest::Approx(0.0));

  p = step_true_pose(env, {0, 0, kPi / 2}, {0.1, 0, 0}, 1.0);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.1));
  CHECK(p.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("step_true_pose: stops at wall minus body radius") {
  const auto env = parse_environment(kSquare);
  // Body edge 0.1 m from the +x wall.
  const Pose2 start{2.0 - 0.15 - 0.1, 0.0, 0.0};
  const auto p = step_true_pose(env, start, {0.3, 0, 0.2}, 1.0);
  CHECK(p.x == doctest::Approx(2.0 - 0.15).epsilon(1e-8));
  CHECK(p.theta == doctest::Approx(0.2));
  // Pushing further does not move it; sliding parallel is allowed.
  const auto q = step_true_pose(env, {p.x, 0, 0}, {0.3, 0, 0}, 1.0);
  CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
  const auto s = step_true_pose(env, {p.x, 0, 0}, {0, 0.1, 0}, 1.0);
  CHECK(s.y == doctest::Approx(0.1));
}

TEST_CASE("step_true_pose never lets the body disk overlap a wall") {
  const auto env = load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> v(-0.3, 0.3), w(-1.0, 1.0);
  Pose2 pose{3.0, 3.0, 0.0};
  double min_clearance = 1e9;
  for (int i = 0; i < 20000; ++i) {
    Twist2 cmd{v(rng), v(rng), w(rng)};
    // Bias toward long straight pushes so walls are hit often.
    for (int k = 0; k < 25; ++k) {
      pose = step_true_pose(env, pose, cmd, 0.02);
      min_clearance = std::min(min_clearance, env.distance_to_walls(pose.translation()));
    }
  }
  CHECK(min_clearance >= 0.15);
}

TEST_CASE("simulate_scan: room geometry") {
  const auto env = parse_environment(kSquare);
  LidarConfig cfg;
  cfg.beam_count = 8;
  cfg.angle_min = 0.0;
  cfg.angle_max = 7.0 * kPi / 4.0;
  Rng rng(1);
  const auto scan = simulate_scan(env, {0, 0, 0}, cfg, NoiseModel::zero(), rng);
  REQUIRE(scan.ranges.size() == 8);
  CHECK(scan.ranges[0] == doctest::Approx(2.0));
  CHECK(scan.ranges[1] == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(scan.angle_increment == doctest::Approx(kPi / 4.0));
}

TEST_CASE("simulate_scan: no return beyond range") {
  const auto env = parse_environment("5 -1 5 1\n");
  LidarConfig cfg;
  Rng rng(1);
  const auto scan = simulate_scan(env, {0, 0, 0}, cfg, NoiseModel::zero(), rng);
  CHECK(scan.ranges[180] == doctest::Approx(5.0));  // beam at 0 rad
  CHECK_FALSE(has_return(scan.ranges[0]));          // beam at -pi
  cfg.range_max = 4.0;
  const auto short_scan = simulate_scan(env, {0, 0, 0}, cfg, NoiseModel::zero(), rng);
  CHECK_FALSE(has_return(short_scan.ranges[180]));
}

TEST_CASE("simulate_scan matches the brute-force intersection oracle") {
  const auto env = asymmetric_room();
  LidarConfig cfg;
  Rng rng(3);
  std::mt19937_64 prng(11);
  std::uniform_real_distribution<double> ux(0.3, 3.5), uy(0.3, 3.5), ut(-kPi, kPi);
  for (int trial = 0; trial < 25; ++trial) {
    const Pose2 pose{ux(prng), uy(prng), ut(prng)};
    const auto scan = simulate_scan(env, pose, cfg, NoiseModel::zero(), rng);
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
      const double expect = oracle::nearest_hit(env, pose.translation(), pose.theta + scan.angle(i));
      if (!std::isfinite(expect) || expect > cfg.range_max) {
        CHECK_FALSE(has_return(scan.ranges[i]));
      } else {
        CHECK(std::abs(scan.ranges[i] - std::clamp(expect, cfg.range_min, cfg.range_max)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("simulate_scan: noisy ranges stay within limits and are seed-reproducible") {
  const auto env = asymmetric_room();
  LidarConfig cfg;
  NoiseModel noise;
  noise.lidar_sigma = 0.2;
  Rng a(99), b(99);
  const auto s1 = simulate_scan(env, {1, 3, 0.3}, cfg, noise, a);
  const auto s2 = simulate_scan(env, {1, 3, 0.3}, cfg, noise, b);
  CHECK(s1 == s2);
  for (double r : s1.ranges)
    if (has_return(r)) CHECK((r >= cfg.range_min && r <= cfg.range_max));
}

TEST_CASE("measure_odometry") {
  Rng rng(5);
  const auto zero = NoiseModel::zero();
  CHECK(measure_odometry({1, 2, 0.3}, {1, 2, 0.3}, zero, rng) == Pose2{0, 0, 0});
  const auto d = measure_odometry({0, 0, 0}, {1, 0, 0}, zero, rng);
  CHECK(d.x == doctest::Approx(1.0));
  CHECK(d.y == doctest::Approx(0.0));
  CHECK(d.theta == doctest::Approx(0.0));

  NoiseModel noise;
  Rng a(17), b(17);
  const auto d1 = measure_odometry({0, 0, 0}, {0.5, 0.1, 0.2}, noise, a);
  const auto d2 = measure_odometry({0, 0, 0}, {0.5, 0.1, 0.2}, noise, b);
  CHECK(d1 == d2);
  CHECK(d1 != Pose2{0.5, 0.1, 0.2});
}

TEST_CASE("zero-noise odometry deltas reconstruct the trajectory") {
  const auto env = load_environment(QUADSLAM_DATA_DIR "/envs/office.env");
  Rng rng(1);
  std::mt19937_64 prng(2);
  std::uniform_real_distribution<double> v(-0.3, 0.3), w(-1.0, 1.0);
  Pose2 truth{2.0, 2.0, 0.5}, est = truth;
  for (int i = 0; i < 2000; ++i) {
    const Pose2 next = step_true_pose(env, truth, {v(prng), v(prng), w(prng)}, 0.02);
    est = compose(est, measure_odometry(truth, next, NoiseModel::zero(), rng));
    truth = next;
  }
  CHECK(est.x == doctest::Approx(truth.x).epsilon(1e-9));
  CHECK(est.y == doctest::Approx(truth.y).epsilon(1e-9));
  CHECK(angle_diff(est.theta, truth.theta) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("simulate_imu") {
  Rng rng(1);
  const auto zero = NoiseModel::zero();
  const std::vector<Pose2> still{{1, 1, 0.4}, {1, 1, 0.4}, {1, 1, 0.4}};
  const auto s = simulate_imu(still, zero, 0.01, rng);
  CHECK(s.accel.x() == doctest::Approx(0.0));
  CHECK(s.accel.y() == doctest::Approx(0.0));
  CHECK(s.accel.z() == doctest::Approx(9.81));
  CHECK(s.gyro.norm() == doctest::Approx(0.0));

  const std::vector<Pose2> spin{{0, 0, 0.0}, {0, 0, 0.005}};
  CHECK(simulate_imu(spin, zero, 0.01, rng).gyro.z() == doctest::Approx(0.5));

  NoiseModel noise;
  Rng a(8), b(8);
  const auto n1 = simulate_imu(spin, noise, 0.01, a);
  const auto n2 = simulate_imu(spin, noise, 0.01, b);
  CHECK(n1.accel == n2.accel);
  CHECK(n1.gyro == n2.gyro);

  CHECK_THROWS(simulate_imu(std::vector<Pose2>{{0, 0, 0}}, zero, 0.01, rng));
}
