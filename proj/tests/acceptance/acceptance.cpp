// Scenario-scale acceptance checks. Prints one PASS/FAIL line per criterion
// and exits non-zero if any fails.

#include "quadslam/app/runner.hpp"
#include "quadslam/estimation/madgwick.hpp"
#include "quadslam/gait/ll_link.hpp"
#include "quadslam/gait/servo.hpp"
#include "quadslam/mapping/map_io.hpp"
#include "quadslam/net/link.hpp"
#include "quadslam/net/payloads.hpp"
#include "quadslam/net/server.hpp"
#include "quadslam/net/wire.hpp"
#include "quadslam/slam/filter.hpp"
#include "quadslam/slam/pose_graph.hpp"
#include "support/oracles.hpp"
#include "support/sim_drive.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace quadslam;
namespace fs = std::filesystem;

namespace {

const fs::path kData = QUADSLAM_DATA_DIR;
fs::path g_out;

struct Verdict {
  bool pass{true};
  std::ostringstream detail;

  // Records a numeric check in the detail line.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAILED]");
  }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

app::RunResult run(const std::string& scenario, app::RunOptions opt, const std::string& out_name) {
  opt.out_dir = g_out / out_name;
  fs::remove_all(opt.out_dir);
  return app::run_scenario(app::load_scenario(kData / "scenarios" / scenario), opt);
}

std::optional<app::RunResult> g_a1;  // reused by A5

// A1: single graph robot on the office loop.
void a1(Verdict& v) {
  const auto r = run("office_graph.cfg", {}, "a1_office_graph");
  g_a1 = r;
  const auto& m = r.metrics.robots.at(0);
  v.check(!r.metrics.aborted && m.reached_goal, "run completed");
  v.check(m.agreement.fraction() >= 0.90, "agreement " + fmt(m.agreement.fraction()) + " >= 0.90");
  v.check(m.ate < 0.10, "ATE " + fmt(m.ate) + " m < 0.10");
  v.check(m.ate <= m.ate_odometry, "ATE <= odometry ATE " + fmt(m.ate_odometry) + " m");
  v.check(r.wall_seconds < 120.0, "runtime " + fmt(r.wall_seconds, 3) + " s < 120");
}

// A2: particle filter on the same loop, then the zero-noise oracle.
void a2(Verdict& v) {
  const auto r = run("office_filter.cfg", {}, "a2_office_filter");
  const auto& m = r.metrics.robots.at(0);
  v.check(!r.metrics.aborted, "run completed");
  v.check(m.agreement.fraction() >= 0.80, "best-particle agreement " + fmt(m.agreement.fraction()) + " >= 0.80");

  // Zero-noise known-pose oracle on the scenario's own loop.
  const auto cfg = app::load_scenario(kData / "scenarios" / "office_filter.cfg");
  const auto& robot = cfg.robots.at(0);
  const auto env = world::load_environment(cfg.environment);
  const auto frames = testsim::drive(env, robot.start, robot.waypoints, world::NoiseModel::zero());
  slam::FilterConfig fc;
  fc.particle_count = 1;
  fc.motion = {0, 0, 0, 0};
  auto s = slam::rbpf_init(fc, frames[0].truth);
  int integrated = 0;
  std::vector<std::pair<Pose2, LaserScan>> known;
  for (const auto& f : frames) {
    slam::rbpf_update(s, f.odom_delta, f.scan);
    integrated += s.last.integrated;
    known.emplace_back(f.truth, f.scan);
  }
  const auto& g = *s.particles[0].grid;
  const auto expect = oracle::raytrace_map(known, g.origin().translation(), g.resolution());
  std::size_t mismatched = 0;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const auto it = expect.find({x, y});
      mismatched += g.classify(x, y) != g.classify(it == expect.end() ? 0.0 : it->second);
    }
  v.check(integrated == static_cast<int>(frames.size()), "every zero-noise scan integrated");
  v.check(mismatched == 0, "zero-noise N=1 map vs ray-trace oracle: " + std::to_string(mismatched) + " cells differ");
}

// A3: two and three robots in the lab.
void a3(Verdict& v) {
  const auto r = run("lab_merge.cfg", {}, "a3_lab_merge");
  v.check(!r.metrics.aborted && r.metrics.merge.size() == 1, "two-robot run completed");
  if (r.metrics.merge.size() == 1) {
    const auto& e = r.metrics.merge[0];
    const double cell = 0.05;
    v.check(e.overlap >= 0.30, "overlap " + fmt(e.overlap) + " >= 0.30");
    v.check(e.aligned, "aligned with " + std::to_string(e.inliers) + " inliers");
    v.check(e.translation_error <= 2 * cell, "translation error " + fmt(e.translation_error) + " m <= 0.10");
    v.check(e.rotation_error <= 2.0, "rotation error " + fmt(e.rotation_error) + " deg <= 2");
    v.check(r.metrics.merged_agreement.fraction() >= 0.85,
            "merged agreement " + fmt(r.metrics.merged_agreement.fraction()) + " >= 0.85");
  }
  const auto r3 = run("lab_merge3.cfg", {}, "a3_lab_merge3");
  std::size_t aligned = 0;
  double worst = 0.0;
  for (const auto& e : r3.metrics.merge) {
    aligned += e.aligned;
    worst = std::max(worst, e.translation_error);
  }
  v.check(!r3.metrics.aborted && r3.metrics.merge.size() == 2 && aligned == 2,
          "three robots: " + std::to_string(aligned + 1) + "/3 in the merged map, worst error " + fmt(worst) + " m");
}

// A4: optimizer on synthetic noisy loops with an exact closure, plus the
// Jacobian check. Every seed of the sweep has to meet both bounds.
void a4(Verdict& v) {
  const int n = 10, seeds = 200;
  const Eigen::Matrix3d odo = Eigen::Vector3d(50, 50, 100).asDiagonal();
  const Eigen::Matrix3d closure = Eigen::Vector3d(400, 400, 1000).asDiagonal();
  std::vector<Pose2> truth;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    truth.push_back({2.0 * std::sin(a), 2.0 - 2.0 * std::cos(a), wrap_angle(a)});
  }
  int chi2_ok = 0, pose_ok = 0;
  std::vector<double> worst_errors;
  for (int seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> nxy(0.0, 0.03), nth(0.0, 0.02);
    slam::PoseGraph g;
    Pose2 pose = truth[0];
    g.add_node(pose, {});
    for (int i = 1; i < n; ++i) {
      const Pose2 rel = between(truth[i - 1], truth[i]);
      const Pose2 z{rel.x + nxy(rng), rel.y + nxy(rng), wrap_angle(rel.theta + nth(rng))};
      pose = compose(pose, z);
      g.add_node(pose, {});
      g.add_edge({i - 1, i, z, odo, slam::EdgeKind::Odometry});
    }
    g.add_edge({n - 1, 0, between(truth[n - 1], truth[0]), closure, slam::EdgeKind::LoopClosure});
    const auto res = slam::optimize(g);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, (g.node(i).pose.translation() - truth[i].translation()).norm());
    chi2_ok += res.final_chi2 <= 0.1 * res.initial_chi2;
    pose_ok += worst <= 0.05;
    worst_errors.push_back(worst);
  }
  std::sort(worst_errors.begin(), worst_errors.end());
  v.check(chi2_ok == seeds, "chi2 reduced >= 90% in " + std::to_string(chi2_ok) + "/" + std::to_string(seeds) +
                                " loops (sigma 0.03 m, 0.02 rad)");
  v.check(pose_ok == seeds, "all poses within 0.05 m in " + std::to_string(pose_ok) + "/" + std::to_string(seeds) +
                                " loops, median worst " + fmt(worst_errors[seeds / 2]) + " m");

  std::mt19937_64 rng(2024);
  // Central differences of the residual against the analytic Jacobians.
  std::uniform_real_distribution<double> u(-4.0, 4.0), t(-3.1, 3.1);
  const double h = 1e-6;
  double rel_worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Pose2 a{u(rng), u(rng), t(rng)}, b{u(rng), u(rng), t(rng)}, z{0.5 * u(rng), 0.5 * u(rng), 0.5 * t(rng)};
    const auto lin = slam::linearize_edge(a, b, z);
    for (int which = 0; which < 2; ++which)
      for (int c = 0; c < 3; ++c) {
        auto eval = [&](double d) {
          Pose2 pa = a, pb = b;
          Pose2& p = which == 0 ? pa : pb;
          (c == 0 ? p.x : c == 1 ? p.y : p.theta) += d;
          return slam::edge_residual(pa, pb, z);
        };
        Eigen::Vector3d fd = (eval(h) - eval(-h)) / (2 * h);
        fd(2) = wrap_angle(fd(2) * 2 * h) / (2 * h);
        const Eigen::Vector3d an = which == 0 ? lin.a.col(c) : lin.b.col(c);
        rel_worst = std::max(rel_worst, (fd - an).norm() / std::max(1.0, an.norm()));
      }
  }
  v.check(rel_worst < 1e-5, "Jacobian relative error " + fmt(rel_worst, 3) + " < 1e-5");
}

// A5: save mid-run, continue, compare with the uninterrupted A1 run.
void a5(Verdict& v) {
  if (!g_a1) {
    v.check(false, "needs the A1 run");
    return;
  }
  app::RunOptions save;
  save.checkpoint_at = 60.0;
  save.stop_at_checkpoint = true;
  run("office_graph.cfg", save, "a5_checkpoint");
  const auto file = g_out / "a5_checkpoint" / "squeaky_checkpoint.qsg";
  v.check(fs::exists(file), "graph saved at t = 60 s");
  app::RunOptions cont;
  cont.resume["squeaky"] = file;
  const auto r = run("office_graph.cfg", cont, "a5_resumed");
  const auto& a = g_a1->outcomes.at("squeaky").map;
  const auto& b = r.outcomes.at("squeaky").map;
  // Compare on the uninterrupted map's lattice; cells outside the resumed
  // map count as unknown there.
  std::size_t differ = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      const auto c = b.world_to_cell(a.cell_center(x, y));
      const auto cb = b.in_bounds(c) ? b.classify(c.x, c.y) : mapping::CellClass::Unknown;
      differ += a.classify(x, y) != cb;
    }
  const double frac = static_cast<double>(differ) / static_cast<double>(a.cell_count());
  v.check(frac <= 0.01, "ternary cells differing " + fmt(100 * frac) + "% <= 1%");
}

// A6: Madgwick from a 10 degree tilt, static level IMU at 100 Hz.
void a6(Verdict& v) {
  world::ImuSample still;
  const double dt = 0.01;
  auto q = estimation::Quaternion::from_axis_angle(1, 0, 0, deg2rad(10.0));
  double converged_at = -1.0;
  for (int i = 1; i <= 200; ++i) {
    q = estimation::madgwick_update(q, still, 0.1, dt);
    if (converged_at < 0 && rad2deg(q.tilt()) < 1.0) converged_at = i * dt;
  }
  v.check(converged_at >= 0 && rad2deg(q.tilt()) < 1.0,
          "tilt " + fmt(rad2deg(q.tilt())) + " deg after 2 s, below 1 deg from t = " + fmt(converged_at, 3) + " s");
  std::mt19937_64 rng(6);
  std::normal_distribution<double> acc(0.0, 0.5), gyr(0.0, 0.3);
  q = {};
  double drift = 0.0;
  for (int i = 0; i < 100000; ++i) {
    world::ImuSample s;
    s.accel += Eigen::Vector3d(acc(rng), acc(rng), acc(rng));
    s.gyro = Eigen::Vector3d(gyr(rng), gyr(rng), gyr(rng));
    q = estimation::madgwick_update(q, s, 0.1, dt);
    drift = std::max(drift, std::abs(q.norm() - 1.0));
  }
  v.check(drift < 1e-6, "norm drift " + fmt(drift, 3) + " < 1e-6 over 1e5 steps");
}

// A7: LL contract over a million random draws.
void a7(Verdict& v) {
  std::mt19937_64 rng(77);
  const TwistLimits lim;
  std::uniform_real_distribution<double> ux(-lim.max_vx, lim.max_vx), uy(-lim.max_vy, lim.max_vy),
      uw(-lim.max_wz, lim.max_wz), uphase(0.0, 1.0), uzero(0.0, 180.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> ubyte(0, static_cast<int>(gait::kFrameSize) - 1), ubit(0, 7);
  const gait::GaitParams params;
  std::uint64_t out_of_range = 0, roundtrip_bad = 0, corrupt_accepted = 0, ik_fail = 0;
  gait::CalibrationTable cal;
  const int draws = 1'000'000;
  for (int n = 0; n < draws; ++n) {
    if (n % 100 == 0) {
      // Fresh random calibration with zero + offset inside [0, 180].
      for (std::size_t j = 0; j < gait::kJointCount; ++j) {
        cal.zero_pose[j] = uzero(rng);
        cal.offsets[j] = -cal.zero_pose[j] + unit(rng) * 180.0;
      }
    }
    gait::JointAngles raw;
    try {
      raw = gait::twist_to_joints({ux(rng), uy(rng), uw(rng)}, uphase(rng), params);
    } catch (const gait::OutOfWorkspace&) {
      ++ik_fail;
      continue;
    }
    const auto cmd = gait::apply_calibration(raw, cal);
    for (std::size_t j = 0; j < gait::kJointCount; ++j) out_of_range += cmd[j] > 180;
    const auto frame = gait::ll_encode(cmd);
    if (gait::ll_decode(frame) != cmd) ++roundtrip_bad;
    auto bad = frame;
    bad[static_cast<std::size_t>(ubyte(rng))] ^= static_cast<std::uint8_t>(1u << ubit(rng));
    try {
      gait::ll_decode(bad);
      ++corrupt_accepted;
    } catch (const gait::FrameDecodeError&) {
    }
  }
  v.check(ik_fail == 0, std::to_string(draws) + " draws, " + std::to_string(ik_fail) + " out of workspace");
  v.check(out_of_range == 0, std::to_string(out_of_range) + " servo angles outside [0,180]");
  v.check(roundtrip_bad == 0, std::to_string(roundtrip_bad) + " frames failed the round trip");
  v.check(corrupt_accepted == 0, std::to_string(corrupt_accepted) + " single-bit corruptions accepted");

  // Through the real channel: corrupted frames are counted and the previous
  // targets stay in force.
  gait::LlChannel ch;
  gait::LowLevelController ll(ch);
  std::array<std::uint8_t, gait::kJointCount> deg;
  deg.fill(90);
  const gait::ServoCommand good(deg);
  ch.send(gait::ll_encode(good));
  auto broken = gait::ll_encode(good);
  broken[3] ^= 0x10;
  ch.send(broken);
  ch.send(std::vector<std::uint8_t>{0xA5, 1, 2});
  ll.stop();
  v.check(ll.accepted() == 1 && ll.rejected() == 2 && ll.current() == good, "LL consumer kept the last good frame");
}

// A8: three publishers and two subscribers over TCP.
void a8(Verdict& v) {
  net::Hub hub;
  net::HubServer server(hub, {"127.0.0.1", 0, 0, false});
  server.start();
  const auto port = server.tcp_port();
  net::TcpLink early("127.0.0.1", port, {net::Role::Ui, "", "early"});
  early.subscribe("*/pose");
  early.subscribe("*/map");

  const int poses = 100;
  std::map<std::string, std::string> sent_digest;
  std::mutex mu;
  std::vector<std::thread> pubs;
  std::atomic<int> violations_rejected{0};
  for (const std::string ns : {"r1", "r2", "r3"}) {
    pubs.emplace_back([&, ns] {
      net::TcpLink link("127.0.0.1", port, {net::Role::Robot, ns, ns});
      mapping::OccupancyGrid grid(0.05, 40, 30, {});
      for (std::size_t i = 0; i < grid.data().size(); ++i) grid.data()[i] = std::sin(static_cast<double>(i) + ns[1]);
      const auto payload = net::encode_map(grid);
      {
        std::lock_guard lk(mu);
        sent_digest[ns] = net::sha256_hex(payload);
      }
      link.send(ns + "/map", net::PayloadType::Map, payload, 0.0);
      for (int i = 0; i < poses; ++i)
        link.send(ns + "/pose", net::PayloadType::Pose, net::encode_pose({i * 0.1, {i * 0.01, 0.0, 0.0}}), i * 0.1);
      try {
        link.send((ns == "r1" ? "r2" : "r1") + std::string("/pose"), net::PayloadType::Pose,
                  net::encode_pose({0.0, {}}), 0.0);
      } catch (const net::HubError& e) {
        if (e.code() == net::HubErrorCode::NamespaceViolation) ++violations_rejected;
      }
    });
  }
  for (auto& t : pubs) t.join();

  std::map<std::string, std::uint64_t> last_seq;
  std::map<std::string, std::string> got_digest;
  bool fifo = true;
  int received = 0;
  const int expected = 3 * (poses + 1);
  while (received < expected) {
    auto e = early.next(std::chrono::seconds(5));
    if (!e) break;
    ++received;
    if (e->payload_type == net::PayloadType::Map) {
      got_digest[e->publisher] = net::sha256_hex(e->payload);
      continue;
    }
    fifo = fifo && e->sequence == last_seq[e->publisher] + 1;
    last_seq[e->publisher] = e->sequence;
  }
  v.check(received == expected && fifo, std::to_string(received) + "/" + std::to_string(expected) +
                                            " deliveries, per-publisher FIFO without gaps");
  v.check(early.dropped() == 0, "no drops for the live subscriber");
  v.check(violations_rejected == 3, std::to_string(violations_rejected.load()) + "/3 namespace violations rejected");

  net::TcpLink late("127.0.0.1", port, {net::Role::Ui, "", "late"});
  late.subscribe("*/map");
  std::map<std::string, std::string> late_digest;
  while (auto e = late.next(std::chrono::seconds(2))) {
    late_digest[e->publisher] = net::sha256_hex(e->payload);
    if (late_digest.size() == 3) break;
  }
  v.check(late_digest.size() == 3, "late subscriber got " + std::to_string(late_digest.size()) + "/3 latched maps");
  v.check(got_digest == sent_digest && late_digest == sent_digest, "payload SHA-256 identical end to end");
  early.close();
  late.close();
  server.stop();
}

// A9: the two-robot lab scenario again, this time over TCP.
void a9(Verdict& v) {
  app::RunOptions opt;
  opt.transport = app::Transport::Tcp;
  run("lab_merge.cfg", opt, "a9_lab_merge_rerun");
  const auto a = g_out / "a3_lab_merge", b = g_out / "a9_lab_merge_rerun";
  std::size_t compared = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    ++compared;
    if (!fs::exists(b / name) || slurp(entry.path()) != slurp(b / name)) {
      ++differ;
      v.detail << (v.detail.tellp() > 0 ? "; " : "") << "differs: " << name.string();
    }
  }
  v.check(compared > 0 && differ == 0,
          std::to_string(compared - differ) + "/" + std::to_string(compared) + " artifacts bit-identical (metrics.json, maps, trajectories)");
}

}  // namespace

int main(int argc, char** argv) {
  g_out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "quadslam_acceptance";
  fs::create_directories(g_out);
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5}, {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << name << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << v.detail.str() << "  (" << fmt(secs, 3)
              << " s)" << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
