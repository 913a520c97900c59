#include "quadslam/app/robot.hpp"

#include "quadslam/gait/servo.hpp"
#include "quadslam/net/payloads.hpp"

#include <algorithm>
#include <cmath>

namespace quadslam::app {

WaypointDriver::WaypointDriver(std::vector<Eigen::Vector2d> waypoints, DriveConfig cfg)
    : waypoints_(std::move(waypoints)), cfg_(cfg) {}

Twist2 WaypointDriver::command(const Pose2& pose) {
  while (next_ < waypoints_.size() && (waypoints_[next_] - pose.translation()).norm() < cfg_.tolerance) ++next_;
  if (done()) return {};
  const Eigen::Vector2d d = waypoints_[next_] - pose.translation();
  const double err = angle_diff(std::atan2(d.y(), d.x()), pose.theta);
  const double wz = std::clamp(cfg_.heading_gain * err, -cfg_.max_turn, cfg_.max_turn);
  if (std::abs(err) > cfg_.heading_tolerance) return {0.0, 0.0, wz};
  return {std::min(cfg_.max_speed, d.norm()), 0.0, wz};
}

RobotPipeline::RobotPipeline(const ScenarioConfig& scenario, const RobotConfig& robot, std::size_t index,
                             const world::Environment& env, const gait::CalibrationTable& calibration,
                             net::HubLink& link, std::optional<slam::PoseGraph> resume)
    : sc_(scenario), robot_(robot), env_(env), calibration_(calibration), link_(link), noise_(scenario.noise),
      rng_(robot_seed(scenario.seed, index, 1)), true_pose_(robot.start), true_at_scan_(robot.start),
      driver_(robot.waypoints, scenario.drive), madgwick_(scenario.madgwick_beta) {
  noise_.rng_seed = robot_seed(scenario.seed, index, 1);
  history_.push_back(true_pose_);
  if (robot_.drive == DriveMode::Teleop) link_.subscribe(robot_.ns + "/cmd_vel");

  if (robot_.backend == Backend::Filter) {
    if (resume) throw ScenarioError("robot '" + robot_.ns + "': only graph robots can resume a saved graph");
    slam::FilterConfig fc = sc_.filter;
    fc.seed = robot_seed(scenario.seed, index, 2);
    filter_.emplace(fc, Pose2::identity(), sc_.filter_updates);
  } else {
    if (resume) {
      skip_until_ = resume->clock;
      graph_ = std::make_unique<slam::GraphMapper>(sc_.graph, std::move(*resume));
    } else {
      graph_ = std::make_unique<slam::GraphMapper>(sc_.graph);
    }
    queue_ = std::make_unique<slam::ScanQueue>(sc_.graph.mode);
    worker_ = std::thread([this] { worker(); });
  }
  ll_ = std::make_unique<gait::LowLevelController>(channel_);
  on_scan(0.0);
}

RobotPipeline::~RobotPipeline() {
  if (queue_) queue_->close();
  if (worker_.joinable()) worker_.join();
  if (ll_) ll_->stop();
}

Twist2 RobotPipeline::next_command() {
  const double t = static_cast<double>(step_) * sc_.dt;
  if (robot_.drive == DriveMode::Scripted) return sc_.body.limits.clamp(driver_.command(true_pose_));
  while (auto env = link_.next(std::chrono::milliseconds(0))) {
    if (env->payload_type != net::PayloadType::CmdVel) continue;
    try {
      teleop_cmd_ = net::decode_twist(env->payload);
      teleop_stamp_ = t;
    } catch (const net::HubError&) {
    }
  }
  // Dead-man: no fresh command for half a second stops the robot.
  if (teleop_stamp_ < 0.0 || t - teleop_stamp_ > 0.5) return {};
  return sc_.body.limits.clamp(teleop_cmd_);
}

void RobotPipeline::advance(std::int64_t until) {
  const int per_scan = sc_.steps_per_scan();
  while (step_ < until) {
    const Twist2 cmd = next_command();

    // HL → LL: the joint targets travel only as encoded frames.
    phase_ = std::fmod(phase_ + sc_.dt / sc_.gait.cycle_period, 1.0);
    const auto joints = gait::twist_to_joints(cmd, phase_, sc_.gait);
    channel_.send(gait::ll_encode(gait::apply_calibration(joints, calibration_)));

    ++step_;
    const double t = static_cast<double>(step_) * sc_.dt;
    true_pose_ = world::step_true_pose(env_, true_pose_, cmd, sc_.dt, sc_.body.radius);
    history_.push_back(true_pose_);
    if (history_.size() > 3) history_.pop_front();
    const std::vector<Pose2> hist(history_.begin(), history_.end());
    madgwick_.update(world::simulate_imu(hist, noise_, sc_.dt, rng_, t), sc_.dt);

    if (step_ % per_scan == 0) on_scan(t);
  }
}

void RobotPipeline::on_scan(double t) {
  if (step_ > 0) {
    // Leg odometry is reported at the lidar rate.
    const Pose2 measured = world::measure_odometry(true_at_scan_, true_pose_, noise_, rng_);
    odom_ = estimation::fuse_odometry(odom_, measured, madgwick_.yaw(), sc_.fusion_alpha, t);
  }
  true_at_scan_ = true_pose_;
  LaserScan scan = world::simulate_scan(env_, true_pose_, sc_.lidar, noise_, rng_, t);
  out_.truth.push_back({t, true_pose_});
  out_.odometry.push_back({t, odom_.pose});
  ++out_.scans;

  link_.send(robot_.ns + "/scan", net::PayloadType::Scan, net::encode_scan(scan), t);
  if (t > skip_until_) {
    const Pose2 delta = between(odom_fed_, odom_.pose);
    odom_fed_ = odom_.pose;
    feed(delta, std::move(scan));
  } else {
    odom_fed_ = odom_.pose;
  }
  link_.send(robot_.ns + "/pose", net::PayloadType::Pose, net::encode_pose({t, estimate_now()}), t);
}

void RobotPipeline::feed(const Pose2& delta, LaserScan scan) {
  if (filter_) {
    filter_->process(delta, scan);
    return;
  }
  {
    std::lock_guard lk(mu_);
    if (worker_error_) std::rethrow_exception(worker_error_);
    ++pushed_;
  }
  queue_->push({delta, std::move(scan)});
}

void RobotPipeline::worker() {
  while (auto item = queue_->pop()) {
    std::unique_lock lk(mu_);
    try {
      graph_->process(item->odom_delta, item->scan);
      latest_estimate_ = graph_->pose();
    } catch (...) {
      worker_error_ = std::current_exception();
    }
    // In async mode one item can stand for several pushes; the newest scan
    // always survives, so reaching its count means the queue is drained.
    processed_ = pushed_;
    lk.unlock();
    idle_cv_.notify_all();
  }
}

void RobotPipeline::wait_idle() {
  if (!queue_) return;
  std::unique_lock lk(mu_);
  idle_cv_.wait(lk, [&] { return processed_ == pushed_ || worker_error_; });
  if (worker_error_) std::rethrow_exception(worker_error_);
}

Pose2 RobotPipeline::estimate_now() {
  if (filter_) return filter_->pose();
  std::lock_guard lk(mu_);
  return latest_estimate_;
}

mapping::OccupancyGrid RobotPipeline::current_map() {
  if (filter_) return *slam::best_map(filter_->state()).grid;
  wait_idle();
  std::lock_guard lk(mu_);
  if (graph_->graph().empty()) return mapping::make_grid_around({0.0, 0.0}, 1.0, sc_.graph.map_resolution);
  return slam::render_map(graph_->graph(), sc_.graph.map_resolution);
}

void RobotPipeline::publish_map() {
  const double t = static_cast<double>(step_) * sc_.dt;
  link_.send(robot_.ns + "/map", net::PayloadType::Map, net::encode_map(current_map()), t);
}

slam::PoseGraph RobotPipeline::snapshot_graph() {
  if (!graph_) throw ScenarioError("robot '" + robot_.ns + "' has no pose graph");
  wait_idle();
  std::lock_guard lk(mu_);
  return graph_->graph();
}

RobotOutcome RobotPipeline::finish() {
  if (finished_) throw ScenarioError("robot '" + robot_.ns + "' already finished");
  finished_ = true;
  ll_->stop();
  out_.ll_accepted = ll_->accepted();
  out_.ll_rejected = ll_->rejected();
  out_.reached_goal = driver_.done();
  if (filter_) {
    const auto best = slam::best_map(filter_->state());
    out_.map = *best.grid;
    out_.estimate = best.trajectory;
    out_.slam_updates = static_cast<std::size_t>(filter_->updates());
    return out_;
  }
  wait_idle();
  queue_->close();
  worker_.join();
  if (worker_error_) std::rethrow_exception(worker_error_);
  if (!graph_->graph().empty()) graph_->finish();
  const auto& g = graph_->graph();
  for (const auto& n : g.nodes()) out_.estimate.push_back({n.scan.timestamp, n.pose});
  out_.map = g.empty() ? mapping::make_grid_around({0.0, 0.0}, 1.0, sc_.graph.map_resolution)
                       : slam::render_map(g, sc_.graph.map_resolution);
  out_.graph = g;
  out_.slam_updates = g.nodes().size();
  out_.loop_closures = graph_->loop_closures();
  return out_;
}

}  // namespace quadslam::app
