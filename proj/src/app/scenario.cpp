#include "quadslam/app/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <array>
#include <sstream>

namespace quadslam::app {

std::string_view to_string(Backend b) { return b == Backend::Filter ? "filter" : "graph"; }
std::string_view to_string(DriveMode d) { return d == DriveMode::Scripted ? "scripted" : "teleop"; }
std::string_view to_string(Transport t) { return t == Transport::Inproc ? "inproc" : "tcp"; }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) throw ScenarioError("not a number: '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ScenarioError("not an unsigned integer: '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  const auto v = to_uint(s);
  if (v > 1'000'000'000) throw ScenarioError("integer out of range: '" + s + "'");
  return static_cast<int>(v);
}

// "x y theta_deg"
Pose2 to_pose(const std::string& s) {
  const auto w = words(s);
  if (w.size() != 3) throw ScenarioError("start needs 'x y theta_deg'");
  return {to_double(w[0]), to_double(w[1]), wrap_angle(deg2rad(to_double(w[2])))};
}

// "x y; x y; ..."
std::vector<Eigen::Vector2d> to_waypoints(const std::string& s) {
  std::vector<Eigen::Vector2d> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ';');) {
    const auto w = words(item);
    if (w.empty()) continue;
    if (w.size() != 2) throw ScenarioError("waypoint needs 'x y': '" + trim(item) + "'");
    out.emplace_back(to_double(w[0]), to_double(w[1]));
  }
  return out;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

template <class T>
Setter num(T ScenarioConfig::*field) {
  return [field](ScenarioConfig& c, const std::string& v) { c.*field = static_cast<T>(to_double(v)); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["name"] = [](ScenarioConfig& c, const std::string& v) { c.name = v; };
    t["seed"] = [](ScenarioConfig& c, const std::string& v) { c.seed = to_uint(v); };
    t["duration"] = num(&ScenarioConfig::duration);
    t["dt"] = num(&ScenarioConfig::dt);
    t["map_period"] = num(&ScenarioConfig::map_period);
    t["merge_cadence"] = num(&ScenarioConfig::merge_cadence);
    t["transport"] = [](ScenarioConfig& c, const std::string& v) {
      if (v == "inproc") c.transport = Transport::Inproc;
      else if (v == "tcp") c.transport = Transport::Tcp;
      else throw ScenarioError("transport must be inproc or tcp");
    };
    t["tcp_port"] = [](ScenarioConfig& c, const std::string& v) {
      const auto p = to_uint(v);
      if (p > 65535) throw ScenarioError("port out of range");
      c.tcp_port = static_cast<std::uint16_t>(p);
    };
    t["ws_port"] = [](ScenarioConfig& c, const std::string& v) {
      const auto p = to_uint(v);
      if (p > 65535) throw ScenarioError("port out of range");
      c.ws_port = static_cast<std::uint16_t>(p);
    };

    t["noise.odom_trans"] = [](ScenarioConfig& c, const std::string& v) { c.noise.odom_trans_sigma = to_double(v); };
    t["noise.odom_rot"] = [](ScenarioConfig& c, const std::string& v) { c.noise.odom_rot_sigma = to_double(v); };
    t["noise.lidar"] = [](ScenarioConfig& c, const std::string& v) {
      c.noise.lidar_sigma = to_double(v);
      c.lidar.range_noise_sigma = c.noise.lidar_sigma;
    };
    t["noise.imu_accel"] = [](ScenarioConfig& c, const std::string& v) { c.noise.imu_accel_sigma = to_double(v); };
    t["noise.imu_gyro"] = [](ScenarioConfig& c, const std::string& v) { c.noise.imu_gyro_sigma = to_double(v); };

    t["lidar.beams"] = [](ScenarioConfig& c, const std::string& v) {
      c.lidar.beam_count = to_int(v);
      c.lidar.angle_max = kPi - 2.0 * kPi / c.lidar.beam_count;
    };
    t["lidar.range_min"] = [](ScenarioConfig& c, const std::string& v) { c.lidar.range_min = to_double(v); };
    t["lidar.range_max"] = [](ScenarioConfig& c, const std::string& v) { c.lidar.range_max = to_double(v); };
    t["lidar.rate"] = [](ScenarioConfig& c, const std::string& v) { c.lidar.scan_rate = to_double(v); };

    t["body.radius"] = [](ScenarioConfig& c, const std::string& v) { c.body.radius = to_double(v); };
    t["gait.cycle_period"] = [](ScenarioConfig& c, const std::string& v) { c.gait.cycle_period = to_double(v); };
    t["gait.step_height"] = [](ScenarioConfig& c, const std::string& v) { c.gait.step_height = to_double(v); };
    t["calibration"] = [](ScenarioConfig& c, const std::string& v) { c.calibration = v; };

    t["estimation.madgwick_beta"] = num(&ScenarioConfig::madgwick_beta);
    t["estimation.fusion_alpha"] = num(&ScenarioConfig::fusion_alpha);

    t["drive.max_speed"] = [](ScenarioConfig& c, const std::string& v) { c.drive.max_speed = to_double(v); };
    t["drive.max_turn"] = [](ScenarioConfig& c, const std::string& v) { c.drive.max_turn = to_double(v); };
    t["drive.tolerance"] = [](ScenarioConfig& c, const std::string& v) { c.drive.tolerance = to_double(v); };
    t["drive.heading_tolerance"] = [](ScenarioConfig& c, const std::string& v) {
      c.drive.heading_tolerance = to_double(v);
    };

    t["filter.particles"] = [](ScenarioConfig& c, const std::string& v) { c.filter.particle_count = to_int(v); };
    t["filter.resample_threshold"] = [](ScenarioConfig& c, const std::string& v) {
      c.filter.resample_threshold = to_double(v);
    };
    t["filter.match_confidence_min"] = [](ScenarioConfig& c, const std::string& v) {
      c.filter.match_confidence_min = to_double(v);
    };
    t["filter.resolution"] = [](ScenarioConfig& c, const std::string& v) { c.filter.resolution = to_double(v); };
    t["filter.linear_update"] = [](ScenarioConfig& c, const std::string& v) {
      c.filter_updates.linear_update = to_double(v);
    };
    t["filter.angular_update"] = [](ScenarioConfig& c, const std::string& v) {
      c.filter_updates.angular_update = to_double(v);
    };
    t["filter.motion_srr"] = [](ScenarioConfig& c, const std::string& v) { c.filter.motion.srr = to_double(v); };
    t["filter.motion_srt"] = [](ScenarioConfig& c, const std::string& v) { c.filter.motion.srt = to_double(v); };
    t["filter.motion_str"] = [](ScenarioConfig& c, const std::string& v) { c.filter.motion.str = to_double(v); };
    t["filter.motion_stt"] = [](ScenarioConfig& c, const std::string& v) { c.filter.motion.stt = to_double(v); };

    t["graph.min_translation"] = [](ScenarioConfig& c, const std::string& v) { c.graph.min_translation = to_double(v); };
    t["graph.min_rotation"] = [](ScenarioConfig& c, const std::string& v) { c.graph.min_rotation = to_double(v); };
    t["graph.match_min_score"] = [](ScenarioConfig& c, const std::string& v) { c.graph.match_min_score = to_double(v); };
    t["graph.loop_radius"] = [](ScenarioConfig& c, const std::string& v) { c.graph.loop_radius = to_double(v); };
    t["graph.loop_min_score"] = [](ScenarioConfig& c, const std::string& v) { c.graph.loop_min_score = to_double(v); };
    t["graph.resolution"] = [](ScenarioConfig& c, const std::string& v) { c.graph.map_resolution = to_double(v); };
    t["graph.mode"] = [](ScenarioConfig& c, const std::string& v) {
      if (v == "sync") c.graph.mode = slam::MappingMode::Synchronous;
      else if (v == "async") c.graph.mode = slam::MappingMode::Asynchronous;
      else throw ScenarioError("graph.mode must be sync or async");
    };

    t["merge.min_inliers"] = [](ScenarioConfig& c, const std::string& v) { c.merge.min_inliers = to_int(v); };
    t["merge.min_confidence"] = [](ScenarioConfig& c, const std::string& v) { c.merge.min_confidence = to_double(v); };
    t["merge.ratio_test"] = [](ScenarioConfig& c, const std::string& v) { c.merge.ratio_test = to_double(v); };
    t["merge.ransac_iterations"] = [](ScenarioConfig& c, const std::string& v) {
      c.merge.ransac_iterations = to_int(v);
    };
    t["merge.inlier_threshold_cells"] = [](ScenarioConfig& c, const std::string& v) {
      c.merge.inlier_threshold_cells = to_double(v);
    };
    t["merge.seed"] = [](ScenarioConfig& c, const std::string& v) { c.merge.seed = to_uint(v); };
    return t;
  }();
  return table;
}

RobotConfig& robot_named(ScenarioConfig& c, const std::string& ns) {
  for (auto& r : c.robots)
    if (r.ns == ns) return r;
  throw ScenarioError("robot '" + ns + "' is not listed in robots");
}

void set_robot_key(ScenarioConfig& c, const std::string& ns, const std::string& field, const std::string& v) {
  RobotConfig& r = robot_named(c, ns);
  if (field == "start") {
    r.start = to_pose(v);
  } else if (field == "backend") {
    if (v == "filter") r.backend = Backend::Filter;
    else if (v == "graph") r.backend = Backend::Graph;
    else throw ScenarioError("backend must be filter or graph");
  } else if (field == "drive") {
    if (v == "scripted") r.drive = DriveMode::Scripted;
    else if (v == "teleop") r.drive = DriveMode::Teleop;
    else throw ScenarioError("drive must be scripted or teleop");
  } else if (field == "waypoints") {
    r.waypoints = to_waypoints(v);
  } else {
    throw ScenarioError("unknown robot key '" + field + "'");
  }
}

}  // namespace

int ScenarioConfig::steps_per_scan() const { return std::max(1, static_cast<int>(std::lround(1.0 / (lidar.scan_rate * dt)))); }
int ScenarioConfig::steps_per_period() const { return std::max(1, static_cast<int>(std::lround(map_period / dt))); }

void ScenarioConfig::validate(const world::Environment& env) const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ScenarioError(what);
  };
  check(dt > 0.0 && dt <= 0.1, "dt must lie in (0, 0.1]");
  check(duration > 0.0, "duration must be positive");
  check(map_period >= dt, "map_period must be at least dt");
  check(merge_cadence >= map_period, "merge_cadence must be at least map_period");
  check(fusion_alpha >= 0.0 && fusion_alpha <= 1.0, "estimation.fusion_alpha must lie in [0, 1]");
  check(madgwick_beta >= 0.0, "estimation.madgwick_beta must be non-negative");
  check(drive.max_speed > 0.0 && drive.max_speed <= body.limits.max_vx, "drive.max_speed must lie in (0, max_vx]");
  check(drive.max_turn > 0.0 && drive.max_turn <= body.limits.max_wz, "drive.max_turn must lie in (0, max_wz]");
  check(drive.tolerance > 0.0 && drive.heading_tolerance > 0.0, "drive tolerances must be positive");
  check(!robots.empty(), "no robots");
  try {
    noise.validate();
    lidar.validate();
    gait.validate();
    filter.validate();
    graph.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  std::set<std::string> seen;
  for (const auto& r : robots) {
    check(seen.insert(r.ns).second, "duplicate robot namespace '" + r.ns + "'");
    check(!r.ns.empty() && r.ns.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") == std::string::npos,
          "robot namespace '" + r.ns + "' must match [a-z0-9_]+");
    check(r.ns != "merged", "namespace 'merged' is reserved");
    check(env.bounds().contains(r.start.translation()), "robot '" + r.ns + "' starts outside the environment");
    check(env.distance_to_walls(r.start.translation()) > body.radius,
          "robot '" + r.ns + "' starts in contact with a wall");
    check(r.drive == DriveMode::Teleop || !r.waypoints.empty(), "scripted robot '" + r.ns + "' has no waypoints");
  }
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string env_value;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    auto fail = [&](const std::string& what) -> ScenarioError {
      return ScenarioError("line " + std::to_string(lineno) + ": " + what);
    };
    if (eq == std::string::npos) throw fail("expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw fail("empty key");
    try {
      if (key == "environment") {
        env_value = value;
      } else if (key == "robots") {
        if (!c.robots.empty()) throw ScenarioError("robots listed twice");
        for (const auto& ns : words(value)) c.robots.push_back(RobotConfig{ns, {}, {}, {}, {}});
      } else if (key.rfind("robot.", 0) == 0) {
        const auto dot = key.find('.', 6);
        if (dot == std::string::npos) throw ScenarioError("robot keys look like robot.<ns>.<field>");
        set_robot_key(c, key.substr(6, dot - 6), key.substr(dot + 1), value);
      } else if (auto it = setters().find(key); it != setters().end()) {
        it->second(c, value);
      } else {
        throw ScenarioError("unknown key '" + key + "'");
      }
    } catch (const ScenarioError& e) {
      if (std::string_view(e.what()).rfind("line ", 0) == 0) throw;
      throw fail(e.what());
    }
  }
  if (env_value.empty()) throw ScenarioError("missing 'environment'");
  c.environment = std::filesystem::path(env_value).is_absolute() ? std::filesystem::path(env_value)
                                                                  : base_dir / env_value;
  if (!c.calibration.empty() && c.calibration.is_relative()) c.calibration = base_dir / c.calibration;
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read scenario '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig c = parse_scenario(ss.str(), path.parent_path());
  if (c.name == "scenario") c.name = path.stem().string();
  return c;
}

std::uint64_t robot_seed(std::uint64_t scenario_seed, std::size_t robot_index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(scenario_seed), static_cast<std::uint32_t>(scenario_seed >> 32),
                    static_cast<std::uint32_t>(robot_index), static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace quadslam::app
