#include "quadslam/app/runner.hpp"

#include "quadslam/mapping/map_io.hpp"
#include "quadslam/net/merger_service.hpp"
#include "quadslam/net/server.hpp"
#include "quadslam/slam/graph_io.hpp"

#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <thread>

namespace quadslam::app {

const RobotMetrics& RunMetrics::robot(const std::string& ns) const {
  for (const auto& r : robots)
    if (r.ns == ns) return r;
  throw std::out_of_range("no robot '" + ns + "' in metrics");
}

nlohmann::json to_json(const RunMetrics& m) {
  using nlohmann::json;
  json robots = json::array();
  for (const auto& r : m.robots) {
    robots.push_back({{"ns", r.ns},
                      {"backend", to_string(r.backend)},
                      {"ate_m", r.ate},
                      {"ate_odometry_m", r.ate_odometry},
                      {"agreement", r.agreement.fraction()},
                      {"observed_cells", r.agreement.observed},
                      {"scans", r.scans},
                      {"slam_updates", r.slam_updates},
                      {"loop_closures", r.loop_closures},
                      {"ll_frames", r.ll_frames},
                      {"ll_rejected", r.ll_rejected},
                      {"reached_goal", r.reached_goal}});
  }
  json merge = json::array();
  for (const auto& e : m.merge) {
    merge.push_back({{"ns", e.ns},
                     {"aligned", e.aligned},
                     {"translation_error_m", e.translation_error},
                     {"rotation_error_deg", e.rotation_error},
                     {"inliers", e.inliers},
                     {"confidence", e.confidence},
                     {"overlap", e.overlap}});
  }
  json out = {{"scenario", m.scenario}, {"seed", m.seed},   {"sim_time_s", m.sim_time},
              {"robots", robots},       {"merged", m.merged}, {"anchor", m.anchor},
              {"merged_agreement", m.merged_agreement.fraction()},
              {"merged_observed_cells", m.merged_agreement.observed},
              {"merge", merge},         {"aborted", m.aborted}};
  if (m.aborted) out["error"] = m.error;
  return out;
}

namespace {

gait::CalibrationTable load_calibration_for(const ScenarioConfig& cfg) {
  if (cfg.calibration.empty()) return gait::CalibrationTable::neutral();
  try {
    auto cal = gait::load_calibration(cfg.calibration);
    cal.validate();
    return cal;
  } catch (const std::exception& e) {
    throw ScenarioError(std::string("calibration: ") + e.what());
  }
}

}  // namespace

RunResult run_scenario(ScenarioConfig cfg, const RunOptions& opt) {
  const auto wall_start = std::chrono::steady_clock::now();
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.transport) cfg.transport = *opt.transport;
  if (opt.teleop)
    for (auto& r : cfg.robots) r.drive = DriveMode::Teleop;

  // Everything that can be wrong with the inputs fails here, before any
  // thread or socket exists.
  world::Environment env = [&] {
    try {
      return world::load_environment(cfg.environment);
    } catch (const world::EnvironmentError& e) {
      throw ScenarioError(std::string("environment: ") + e.what());
    }
  }();
  cfg.validate(env);
  const auto calibration = load_calibration_for(cfg);
  std::map<std::string, slam::PoseGraph> resumed;
  for (const auto& [ns, path] : opt.resume) {
    const auto it = std::find_if(cfg.robots.begin(), cfg.robots.end(), [&](const RobotConfig& r) { return r.ns == ns; });
    if (it == cfg.robots.end()) throw ScenarioError("resume: no robot '" + ns + "'");
    if (it->backend != Backend::Graph) throw ScenarioError("resume: robot '" + ns + "' does not use the graph backend");
    try {
      resumed.emplace(ns, slam::load_graph(path));
    } catch (const std::exception& e) {
      throw ScenarioError("resume '" + path.string() + "': " + e.what());
    }
  }

  RunResult result;
  net::Hub hub;
  std::unique_ptr<net::HubServer> server;
  if (cfg.transport == Transport::Tcp || opt.teleop) {
    server = std::make_unique<net::HubServer>(hub, net::ServerConfig{"127.0.0.1", cfg.tcp_port, cfg.ws_port, true});
    server->start();
    result.tcp_port = server->tcp_port();
    result.ws_port = server->ws_port();
    if (opt.on_ready) opt.on_ready(*result.tcp_port, *result.ws_port);
  }
  auto make_link = [&](net::Hello hello) -> std::unique_ptr<net::HubLink> {
    if (cfg.transport == Transport::Tcp) return std::make_unique<net::TcpLink>("127.0.0.1", server->tcp_port(), hello);
    return std::make_unique<net::InprocLink>(hub, hello);
  };

  auto merger_link = make_link({net::Role::Merger, "", "merger"});
  net::MergerService merger(*merger_link, {cfg.merge_cadence, cfg.merge});

  std::vector<std::unique_ptr<net::HubLink>> links;
  std::vector<std::unique_ptr<RobotPipeline>> robots;
  for (std::size_t i = 0; i < cfg.robots.size(); ++i) {
    const auto& rc = cfg.robots[i];
    links.push_back(make_link({net::Role::Robot, rc.ns, rc.ns}));
    std::optional<slam::PoseGraph> resume;
    if (auto it = resumed.find(rc.ns); it != resumed.end()) resume = std::move(it->second);
    robots.push_back(std::make_unique<RobotPipeline>(cfg, rc, i, env, calibration, *links.back(), std::move(resume)));
  }

  const std::int64_t per_period = cfg.steps_per_period();
  const std::int64_t per_merge =
      std::max<std::int64_t>(1, std::llround(cfg.merge_cadence / cfg.dt));
  const std::int64_t max_steps = std::llround(std::ceil(cfg.duration / cfg.dt - 1e-9));
  const bool all_scripted = std::all_of(cfg.robots.begin(), cfg.robots.end(),
                                        [](const RobotConfig& r) { return r.drive == DriveMode::Scripted; });

  std::int64_t target = std::min(per_period, max_steps);
  bool stop = false;
  bool checkpoint_done = false;
  std::mutex error_mu;
  std::string error;
  std::atomic<bool> failed{false};

  auto record_error = [&](const std::string& what) {
    std::lock_guard lk(error_mu);
    if (error.empty()) error = what;
    failed = true;
  };

  // Runs once per period while every robot waits at the barrier, so the
  // robots can be inspected without locks.
  auto on_period = [&]() noexcept {
    try {
      const double t = static_cast<double>(target) * cfg.dt;
      if (failed) {
        stop = true;
        return;
      }
      if (target % per_merge == 0) merger.tick(t);
      if (opt.checkpoint_at && !checkpoint_done && t >= *opt.checkpoint_at - 1e-9) {
        checkpoint_done = true;
        if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);
        for (auto& r : robots)
          if (r->config().backend == Backend::Graph && !opt.out_dir.empty())
            slam::save_graph(r->snapshot_graph(), opt.out_dir / (r->config().ns + "_checkpoint.qsg"));
        if (opt.stop_at_checkpoint) stop = true;
      }
      if (opt.progress) opt.progress(t);
      const bool all_done =
          all_scripted && std::all_of(robots.begin(), robots.end(), [](const auto& r) { return r->done(); });
      if (target >= max_steps || all_done) stop = true;
      if (opt.teleop) std::this_thread::sleep_until(wall_start + std::chrono::duration<double>(t));
      target = std::min(target + per_period, max_steps);
    } catch (const std::exception& e) {
      record_error(e.what());
      stop = true;
    }
  };

  {
    std::barrier sync(static_cast<std::ptrdiff_t>(robots.size()), on_period);
    std::vector<std::thread> threads;
    for (auto& robot : robots) {
      threads.emplace_back([&, r = robot.get()] {
        try {
          while (true) {
            r->advance(target);
            r->publish_map();
            sync.arrive_and_wait();
            if (stop) return;
          }
        } catch (const std::exception& e) {
          record_error(r->config().ns + ": " + e.what());
          sync.arrive_and_drop();
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  RunMetrics& m = result.metrics;
  m.scenario = cfg.name;
  m.seed = cfg.seed;
  m.aborted = failed;
  m.error = error;
  std::int64_t last_step = 0;
  for (auto& r : robots) last_step = std::max(last_step, r->step());
  m.sim_time = static_cast<double>(last_step) * cfg.dt;

  std::map<std::string, Pose2> starts;
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const auto& rc = cfg.robots[i];
    starts[rc.ns] = rc.start;
    RobotMetrics rm;
    rm.ns = rc.ns;
    rm.backend = rc.backend;
    try {
      auto outcome = robots[i]->finish();
      if (!m.aborted)
        links[i]->send(rc.ns + "/map", net::PayloadType::Map, net::encode_map(outcome.map), m.sim_time);
      const auto est_world = to_frame(outcome.estimate, rc.start);
      const auto odom_world = to_frame(outcome.odometry, rc.start);
      if (!est_world.empty()) rm.ate = absolute_trajectory_error(outcome.truth, est_world);
      rm.ate_odometry = absolute_trajectory_error(outcome.truth, odom_world);
      rm.agreement = occupancy_agreement(outcome.map, rc.start, env);
      rm.scans = outcome.scans;
      rm.slam_updates = outcome.slam_updates;
      rm.loop_closures = outcome.loop_closures;
      rm.ll_frames = outcome.ll_accepted;
      rm.ll_rejected = outcome.ll_rejected;
      rm.reached_goal = outcome.reached_goal;
      result.outcomes.emplace(rc.ns, std::move(outcome));
    } catch (const std::exception& e) {
      m.aborted = true;
      if (m.error.empty()) m.error = rc.ns + ": " + e.what();
    }
    m.robots.push_back(rm);
  }

  if (!m.aborted) {
    const auto tick = merger.tick(m.sim_time);
    m.merged = tick.merged;
    m.anchor = tick.anchor;
    if (merger.merged() && starts.count(tick.anchor)) {
      result.merged = merger.merged();
      const Pose2& anchor_start = starts.at(tick.anchor);
      m.merged_agreement = occupancy_agreement(*result.merged, anchor_start, env);
      const auto& anchor_map = result.outcomes.at(tick.anchor).map;
      for (const auto& e : tick.transforms.entries) {
        if (e.ns == tick.anchor || !starts.count(e.ns)) continue;
        MergeMetrics mm;
        mm.ns = e.ns;
        mm.aligned = e.aligned;
        mm.inliers = e.inliers;
        mm.confidence = e.confidence;
        if (e.aligned) {
          const auto err = transform_error(e.transform, between(anchor_start, starts.at(e.ns)));
          mm.translation_error = err.translation;
          mm.rotation_error = rad2deg(err.rotation);
        }
        mm.overlap = observed_overlap(anchor_map, anchor_start, result.outcomes.at(e.ns).map, starts.at(e.ns));
        m.merge.push_back(mm);
      }
    }
  }

  robots.clear();
  for (auto& l : links) l->close();
  merger_link->close();
  if (server) server->stop();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  if (!opt.out_dir.empty()) write_artifacts(result, cfg, opt.out_dir);
  return result;
}

namespace {

void write_trajectory(const std::filesystem::path& path, std::span<const StampedPose> poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "timestamp,x,y,theta\n" << std::setprecision(17);
  for (const auto& p : poses) out << p.timestamp << ',' << p.pose.x << ',' << p.pose.y << ',' << p.pose.theta << '\n';
}

}  // namespace

void write_artifacts(const RunResult& result, const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& rc : cfg.robots) {
    const auto it = result.outcomes.find(rc.ns);
    if (it == result.outcomes.end()) continue;
    const auto& o = it->second;
    mapping::export_map(o.map, dir / (rc.ns + "_map"));
    write_trajectory(dir / (rc.ns + "_true.csv"), o.truth);
    write_trajectory(dir / (rc.ns + "_odometry.csv"), to_frame(o.odometry, rc.start));
    write_trajectory(dir / (rc.ns + "_estimate.csv"), to_frame(o.estimate, rc.start));
    if (o.graph) slam::save_graph(*o.graph, dir / (rc.ns + "_graph.qsg"));
  }
  if (result.merged) mapping::export_map(*result.merged, dir / "merged_map");
  auto doc = to_json(result.metrics);
  if (result.metrics.aborted) doc["partial_artifacts"] = true;
  std::ofstream out(dir / "metrics.json");
  if (!out) throw std::runtime_error("cannot write metrics.json");
  out << doc.dump(2) << '\n';
}

}  // namespace quadslam::app
