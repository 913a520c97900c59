#include <doctest.h>

#include "quadslam/app/metrics.hpp"
#include "quadslam/app/robot.hpp"
#include "quadslam/app/runner.hpp"
#include "quadslam/app/scenario.hpp"
#include "quadslam/mapping/map_io.hpp"
#include "quadslam/net/payloads.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

using namespace quadslam;
using namespace quadslam::app;
using mapping::CellClass;
using mapping::OccupancyGrid;

namespace {

const std::filesystem::path kData = QUADSLAM_DATA_DIR;

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("quadslam_app_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

world::Environment square4() { return world::load_environment(kData / "envs/square4.env"); }

// 4 x 4 m room, one robot driving a small loop.
std::string square_scenario(const std::string& extra = "") {
  return "environment = envs/square4.env\n"
         "seed = 3\n"
         "duration = 60\n"
         "tcp_port = 0\n"
         "ws_port = 0\n"
         "robots = solo\n"
         "robot.solo.start = -1 -1 0\n"
         "robot.solo.backend = graph\n"
         "robot.solo.waypoints = 1 -1; 1 1; -1 1; -1 -1\n" +
         extra;
}

std::vector<StampedPose> line(int n, double dt, Eigen::Vector2d offset = {0, 0}) {
  std::vector<StampedPose> out;
  for (int i = 0; i < n; ++i) out.push_back({i * dt, {0.1 * i + offset.x(), 0.05 * i + offset.y(), 0.0}});
  return out;
}

}  // namespace

TEST_CASE("ATE: identical trajectories give zero") {
  const auto t = line(20, 0.1);
  CHECK(absolute_trajectory_error(t, t) == 0.0);
}

TEST_CASE("ATE: a uniform 0.1 m shift gives 0.1") {
  const auto t = line(20, 0.1);
  const auto e = line(20, 0.1, {0.06, 0.08});
  CHECK(absolute_trajectory_error(t, e) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("ATE: pairs by nearest timestamp and skips estimates beyond tolerance") {
  const auto truth = line(11, 0.1);
  // Estimates 0.02 s late pair with the earlier truth sample; the one at
  // t = 5 s has no truth within 0.05 s and must be ignored.
  std::vector<StampedPose> est;
  for (int i = 0; i < 11; ++i) est.push_back({i * 0.1 + 0.02, truth[i].pose});
  est.push_back({5.0, {100.0, 100.0, 0.0}});
  CHECK(absolute_trajectory_error(truth, est) == 0.0);
}

TEST_CASE("ATE: empty or unpaired input is an error") {
  const auto t = line(5, 0.1);
  CHECK_THROWS_AS(absolute_trajectory_error({}, t), MetricsError);
  CHECK_THROWS_AS(absolute_trajectory_error(t, {}), MetricsError);
  const std::vector<StampedPose> far{{10.0, {}}};
  CHECK_THROWS_AS(absolute_trajectory_error(t, far), MetricsError);
}

TEST_CASE("to_frame composes every pose") {
  const std::vector<StampedPose> p{{0.0, {1.0, 0.0, 0.0}}};
  const auto w = to_frame(p, {2.0, 3.0, kPi / 2});
  CHECK(w[0].pose.x == doctest::Approx(2.0));
  CHECK(w[0].pose.y == doctest::Approx(4.0));
  CHECK(w[0].pose.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("agreement against a counted raster of the square room") {
  // 0.1 m cells, corner at (-2.55, -2.55): every wall runs through the middle
  // of a row or column of 41 cells, and the four corner cells are shared.
  const auto env = square4();
  const int n = 51;
  const std::size_t wall_cells = 4 * 41 - 4;
  const std::size_t total = n * n;
  for (const Pose2 frame : {Pose2{}, Pose2{0.3, -0.2, 0.0}}) {
    // Place the grid so that in the world it always has the same lattice.
    const Pose2 world_origin{-2.55, -2.55, 0.0};
    OccupancyGrid g(0.1, n, n, compose(inverse(frame), world_origin));
    for (auto& v : g.data()) v = -4.0;
    auto a = occupancy_agreement(g, frame, env);
    CHECK(a.observed == total);
    CHECK(a.matching == total - wall_cells);
    for (auto& v : g.data()) v = 4.0;
    a = occupancy_agreement(g, frame, env);
    CHECK(a.matching == wall_cells);
    for (auto& v : g.data()) v = 0.0;
    a = occupancy_agreement(g, frame, env);
    CHECK(a.observed == 0);
    CHECK(a.fraction() == 0.0);
  }
}

TEST_CASE("agreement is frame-consistent for a rotated grid") {
  // The same world lattice expressed through a grid turned by 90 degrees.
  const auto env = square4();
  const int n = 51;
  OccupancyGrid g(0.1, n, n, Pose2{2.55, -2.55, kPi / 2});
  for (auto& v : g.data()) v = -4.0;
  const auto a = occupancy_agreement(g, {}, env);
  CHECK(a.matching == std::size_t(n * n - (4 * 41 - 4)));
}

TEST_CASE("observed overlap") {
  OccupancyGrid a(0.1, 10, 10, {0.0, 0.0, 0.0});
  for (auto& v : a.data()) v = -4.0;
  CHECK(observed_overlap(a, {}, a, {}) == doctest::Approx(1.0));
  CHECK(observed_overlap(a, {}, a, {5.0, 0.0, 0.0}) == 0.0);
  // Half-width shift: 50 shared of 150 distinct cells.
  CHECK(observed_overlap(a, {}, a, {0.5, 0.0, 0.0}) == doctest::Approx(1.0 / 3.0));
  OccupancyGrid unknown(0.1, 10, 10, {});
  CHECK(observed_overlap(unknown, {}, unknown, {}) == 0.0);
}

TEST_CASE("transform_error") {
  const auto e = transform_error({1.0, 1.0, 0.1}, {1.3, 1.4, -0.1});
  CHECK(e.translation == doctest::Approx(0.5));
  CHECK(e.rotation == doctest::Approx(0.2));
  CHECK(transform_error({0, 0, kPi - 0.01}, {0, 0, -kPi + 0.01}).rotation == doctest::Approx(0.02));
}

TEST_CASE("scenario parsing") {
  const auto c =
      parse_scenario(square_scenario("noise.odom_trans = 0.1  # comment\ngraph.mode = async\nfilter.particles = 5\n"), kData);
  CHECK(c.environment == kData / "envs/square4.env");
  CHECK(c.seed == 3);
  CHECK(c.noise.odom_trans_sigma == 0.1);
  CHECK(c.graph.mode == slam::MappingMode::Asynchronous);
  CHECK(c.filter.particle_count == 5);
  REQUIRE(c.robots.size() == 1);
  CHECK(c.robots[0].ns == "solo");
  CHECK(c.robots[0].start == Pose2{-1.0, -1.0, 0.0});
  CHECK(c.robots[0].waypoints.size() == 4);
  CHECK(c.steps_per_scan() == 5);
  CHECK(c.steps_per_period() == 50);
  c.validate(square4());
}

TEST_CASE("scenario start heading is given in degrees") {
  const auto c = parse_scenario(square_scenario("robot.solo.start = 0 0 90\n"), kData);
  CHECK(c.robots[0].start.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("scenario errors") {
  const auto env = square4();
  auto parse_error = [](const std::string& text) {
    try {
      parse_scenario(text, kData);
    } catch (const ScenarioError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(parse_error(square_scenario("bogus = 1\n")).find("line 10: unknown key 'bogus'") != std::string::npos);
  CHECK(parse_error(square_scenario("robot.solo.backend = slam\n")).find("backend") != std::string::npos);
  CHECK(parse_error(square_scenario("robot.other.backend = graph\n")).find("not listed") != std::string::npos);
  CHECK(parse_error(square_scenario("seed = -1\n")).find("unsigned") != std::string::npos);
  CHECK(parse_error(square_scenario("duration\n")).find("key = value") != std::string::npos);
  CHECK(parse_error("robots = a\n").find("environment") != std::string::npos);
  CHECK(parse_error(square_scenario("robot.solo.waypoints = 1 2 3\n")).find("waypoint") != std::string::npos);

  auto invalid = [&](const std::string& extra) {
    const auto c = parse_scenario(square_scenario(extra), kData);
    CHECK_THROWS_AS(c.validate(env), ScenarioError);
  };
  {
    std::string text = square_scenario();
    text.replace(text.find("robots = solo"), 13, "robots = solo solo");
    CHECK_THROWS_AS(parse_scenario(text, kData).validate(env), ScenarioError);
  }
  invalid("robot.solo.start = 5 5 0\n");       // outside
  invalid("robot.solo.start = 1.95 0 0\n");    // touching a wall
  invalid("estimation.fusion_alpha = 1.5\n");
  invalid("drive.max_speed = 2\n");
  invalid("filter.particles = 0\n");
  invalid("robot.solo.waypoints = \n");
}

TEST_CASE("scenario files in data/ parse and validate") {
  for (const auto& entry : std::filesystem::directory_iterator(kData / "scenarios")) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    const auto c = load_scenario(entry.path());
    CHECK(c.name == entry.path().stem().string());
    c.validate(world::load_environment(c.environment));
  }
}

TEST_CASE("robot seeds differ per robot and per stream but are reproducible") {
  CHECK(robot_seed(7, 0, 1) == robot_seed(7, 0, 1));
  CHECK(robot_seed(7, 0, 1) != robot_seed(7, 1, 1));
  CHECK(robot_seed(7, 0, 1) != robot_seed(7, 0, 2));
  CHECK(robot_seed(7, 0, 1) != robot_seed(8, 0, 1));
}

TEST_CASE("waypoint driver turns in place, then drives, then stops") {
  WaypointDriver d({{1.0, 0.0}, {1.0, 1.0}}, DriveConfig{});
  auto cmd = d.command({0.0, 0.0, kPi / 2});
  CHECK(cmd.vx == 0.0);
  CHECK(cmd.wz == doctest::Approx(-0.8));
  cmd = d.command({0.0, 0.0, 0.0});
  CHECK(cmd.vx == doctest::Approx(0.25));
  CHECK(cmd.wz == 0.0);
  cmd = d.command({0.95, 0.0, 0.0});  // within tolerance: next waypoint is to the left
  CHECK(d.reached() == 1);
  CHECK(cmd.vx == 0.0);
  CHECK(cmd.wz > 0.0);
  d.command({1.0, 0.95, kPi / 2});
  CHECK(d.done());
  CHECK(d.command({1.0, 0.95, kPi / 2}).is_zero());
}

TEST_CASE("run: zero-noise square room, graph backend") {
  auto cfg = parse_scenario(square_scenario("noise.odom_trans = 0\nnoise.odom_rot = 0\nnoise.lidar = 0\n"
                                            "noise.imu_accel = 0\nnoise.imu_gyro = 0\n"
                                            "estimation.fusion_alpha = 0\n"),
                            kData);
  const auto out = scratch("zero");
  RunOptions opt;
  opt.out_dir = out;
  const auto r = run_scenario(cfg, opt);
  REQUIRE_FALSE(r.metrics.aborted);
  const auto& m = r.metrics.robot("solo");
  CHECK(m.reached_goal);
  CHECK(m.agreement.fraction() >= 0.95);
  CHECK(m.ate < 1e-6);
  CHECK(m.ate_odometry < 1e-9);
  CHECK(m.ll_frames == static_cast<std::uint64_t>(std::llround(r.metrics.sim_time / cfg.dt)));
  CHECK(m.ll_rejected == 0);
  // Single robot: the merged map is that robot's map.
  CHECK(r.merged.has_value());
  CHECK(*r.merged == r.outcomes.at("solo").map);
  for (const char* f : {"solo_map.pgm", "solo_map.meta", "solo_true.csv", "solo_odometry.csv", "solo_estimate.csv",
                        "solo_graph.qsg", "merged_map.pgm", "merged_map.meta", "metrics.json"})
    CHECK_MESSAGE(std::filesystem::exists(out / f), f);
  // Exported map round-trips to the same ternary classification.
  CHECK(mapping::import_map(out / "solo_map").ternary() == r.outcomes.at("solo").map.ternary());
}

TEST_CASE("run: same seed gives identical metrics and maps; another seed does not") {
  const auto cfg = parse_scenario(square_scenario(), kData);
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  RunOptions opt;
  opt.out_dir = a;
  run_scenario(cfg, opt);
  opt.out_dir = b;
  run_scenario(cfg, opt);
  opt.out_dir = c;
  opt.seed = 4;
  run_scenario(cfg, opt);
  CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
  CHECK(slurp(a / "solo_map.pgm") == slurp(b / "solo_map.pgm"));
  CHECK(slurp(a / "solo_estimate.csv") == slurp(b / "solo_estimate.csv"));
  CHECK(slurp(a / "metrics.json") != slurp(c / "metrics.json"));
}

TEST_CASE("run: filter backend in the square room") {
  const auto cfg = parse_scenario(square_scenario("robot.solo.backend = filter\nfilter.particles = 10\n"), kData);
  const auto r = run_scenario(cfg);
  REQUIRE_FALSE(r.metrics.aborted);
  const auto& m = r.metrics.robot("solo");
  CHECK(m.slam_updates > 10);
  CHECK(m.agreement.fraction() >= 0.9);
  CHECK(m.ate < 0.1);
}

TEST_CASE("run: configuration errors surface before anything starts") {
  auto cfg = parse_scenario(square_scenario(), kData);
  cfg.environment = kData / "envs/missing.env";
  CHECK_THROWS_AS(run_scenario(cfg), ScenarioError);
  cfg = parse_scenario(square_scenario("robot.solo.backend = filter\n"), kData);
  RunOptions opt;
  opt.resume["solo"] = "/nonexistent.qsg";
  CHECK_THROWS_AS(run_scenario(cfg, opt), ScenarioError);
}

TEST_CASE("run: a robot failure aborts the run and flags partial artifacts") {
  // A 5 s gait cycle asks for strides the legs cannot reach once walking.
  const auto cfg = parse_scenario(square_scenario("gait.cycle_period = 5\n"), kData);
  const auto out = scratch("abort");
  RunOptions opt;
  opt.out_dir = out;
  const auto r = run_scenario(cfg, opt);
  CHECK(r.metrics.aborted);
  CHECK(r.metrics.error.find("solo") != std::string::npos);
  const auto doc = nlohmann::json::parse(slurp(out / "metrics.json"));
  CHECK(doc.at("aborted") == true);
  CHECK(doc.at("partial_artifacts") == true);
}

TEST_CASE("run: save mid-run and continue reproduces the uninterrupted map") {
  const auto cfg = parse_scenario(square_scenario(), kData);
  const auto full = scratch("full"), ck = scratch("ck"), resumed = scratch("resumed");
  RunOptions opt;
  opt.out_dir = full;
  run_scenario(cfg, opt);
  opt.out_dir = ck;
  opt.checkpoint_at = 10.0;
  opt.stop_at_checkpoint = true;
  const auto partial = run_scenario(cfg, opt);
  CHECK(partial.metrics.sim_time == doctest::Approx(10.0));
  REQUIRE(std::filesystem::exists(ck / "solo_checkpoint.qsg"));
  RunOptions cont;
  cont.out_dir = resumed;
  cont.resume["solo"] = ck / "solo_checkpoint.qsg";
  run_scenario(cfg, cont);
  CHECK(slurp(full / "solo_map.pgm") == slurp(resumed / "solo_map.pgm"));
  CHECK(slurp(full / "solo_graph.qsg") == slurp(resumed / "solo_graph.qsg"));
}

TEST_CASE("run: teleop drives through <ns>/cmd_vel with a dead-man stop") {
  auto cfg = parse_scenario(square_scenario("duration = 3\nrobot.solo.drive = teleop\n"), kData);
  std::promise<std::uint16_t> port;
  auto port_future = port.get_future();
  RunOptions opt;
  opt.teleop = true;
  opt.on_ready = [&](std::uint16_t tcp, std::uint16_t) { port.set_value(tcp); };
  auto run = std::async(std::launch::async, [&] { return run_scenario(cfg, opt); });
  const auto tcp = port_future.get();
  {
    net::TcpLink ui("127.0.0.1", tcp, {net::Role::Ui, "", "ui"});
    ui.subscribe("solo/map");
    // 0.2 m/s forward for one second at 10 Hz, then release.
    for (int i = 0; i < 10; ++i) {
      ui.send("solo/cmd_vel", net::PayloadType::CmdVel, net::encode_twist({0.2, 0.0, 0.0}), i * 0.1);
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    ui.send("solo/cmd_vel", net::PayloadType::CmdVel, net::encode_twist({}), 1.0);
    CHECK(ui.next(std::chrono::seconds(3)) != nullptr);  // the robot's latched map
  }
  const auto r = run.get();
  REQUIRE_FALSE(r.metrics.aborted);
  const auto& truth = r.outcomes.at("solo").truth;
  const double moved = truth.back().pose.x - truth.front().pose.x;
  // About 0.2 m, give or take scheduling jitter of the wall-clock pacing.
  CHECK(moved > 0.1);
  CHECK(moved < 0.35);
  CHECK(std::abs(truth.back().pose.y - truth.front().pose.y) < 1e-9);
}
