// Command-line front end: scenario runs, offline merging, graph save/continue
// and a standalone hub.

#include "quadslam/app/runner.hpp"
#include "quadslam/mapping/map_io.hpp"
#include "quadslam/merge/map_merge.hpp"
#include "quadslam/net/merger_service.hpp"
#include "quadslam/net/server.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

using namespace quadslam;

std::atomic<bool> g_stop{false};

void print_summary(const app::RunResult& r) {
  const auto& m = r.metrics;
  std::cout << "scenario " << m.scenario << " seed " << m.seed << ": " << m.sim_time << " s simulated in "
            << r.wall_seconds << " s\n";
  for (const auto& rb : m.robots) {
    std::cout << "  " << rb.ns << " [" << app::to_string(rb.backend) << "] ATE " << rb.ate << " m (odometry "
              << rb.ate_odometry << " m), agreement " << rb.agreement.fraction() << " over " << rb.agreement.observed
              << " cells, " << rb.slam_updates << " updates, " << rb.loop_closures << " closures"
              << (rb.reached_goal ? "" : ", waypoints not finished") << '\n';
  }
  if (m.merged) {
    std::cout << "  merged on " << m.anchor << ": agreement " << m.merged_agreement.fraction() << '\n';
    for (const auto& e : m.merge)
      std::cout << "    " << e.ns << (e.aligned ? " aligned" : " not aligned") << ", error " << e.translation_error
                << " m / " << e.rotation_error << " deg, " << e.inliers << " inliers, overlap " << e.overlap << '\n';
  }
  if (m.aborted) std::cout << "  ABORTED: " << m.error << '\n';
}

int cmd_run(const std::string& cfg_path, std::optional<std::uint64_t> seed, const std::string& out,
            bool teleop, const std::string& transport) {
  auto cfg = app::load_scenario(cfg_path);
  app::RunOptions opt;
  opt.out_dir = out;
  opt.seed = seed;
  opt.teleop = teleop;
  if (!transport.empty()) opt.transport = transport == "tcp" ? app::Transport::Tcp : app::Transport::Inproc;
  if (teleop) {
    opt.progress = [](double t) {
      if (g_stop) throw std::runtime_error("interrupted at t = " + std::to_string(t));
    };
    std::cout << "teleop: hub on tcp " << cfg.tcp_port << ", websocket " << cfg.ws_port << std::endl;
  }
  const auto result = app::run_scenario(cfg, opt);
  print_summary(result);
  if (!out.empty()) std::cout << "artifacts in " << out << '\n';
  return result.metrics.aborted ? 2 : 0;
}

int cmd_merge(const std::vector<std::string>& maps, const std::string& out) {
  std::vector<mapping::OccupancyGrid> grids;
  for (const auto& p : maps) grids.push_back(mapping::import_map(p));
  const auto result = merge::merge_maps(grids);
  nlohmann::json transforms = nlohmann::json::array();
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& t = result.transforms[i];
    nlohmann::json e = {{"map", maps[i]}, {"aligned", t.has_value()}};
    if (t) {
      e["x"] = t->transform.x;
      e["y"] = t->transform.y;
      e["theta"] = t->transform.theta;
      e["inliers"] = t->inlier_count;
      e["confidence"] = t->confidence;
    }
    transforms.push_back(e);
    std::cout << maps[i] << ": " << (t ? "aligned" : "excluded");
    if (t) std::cout << " (" << t->transform.x << ", " << t->transform.y << ", " << rad2deg(t->transform.theta)
                     << " deg), " << t->inlier_count << " inliers";
    std::cout << '\n';
  }
  std::filesystem::create_directories(out);
  mapping::export_map(result.merged, std::filesystem::path(out) / "merged_map");
  std::ofstream(std::filesystem::path(out) / "transforms.json") << transforms.dump(2) << '\n';
  std::cout << "merged map in " << out << '\n';
  return 0;
}

int cmd_export_graph(const std::string& cfg_path, double at, std::optional<std::uint64_t> seed, const std::string& out) {
  app::RunOptions opt;
  opt.out_dir = out;
  opt.seed = seed;
  opt.checkpoint_at = at;
  opt.stop_at_checkpoint = true;
  const auto result = app::run_scenario(app::load_scenario(cfg_path), opt);
  for (const auto& r : result.metrics.robots)
    if (r.backend == app::Backend::Graph) std::cout << "saved " << out << "/" << r.ns << "_checkpoint.qsg\n";
  return result.metrics.aborted ? 2 : 0;
}

int cmd_resume_graph(const std::string& file, const std::string& cfg_path, std::string robot,
                     std::optional<std::uint64_t> seed, const std::string& out) {
  auto cfg = app::load_scenario(cfg_path);
  if (robot.empty()) {
    for (const auto& r : cfg.robots)
      if (r.backend == app::Backend::Graph) {
        robot = r.ns;
        break;
      }
  }
  app::RunOptions opt;
  opt.out_dir = out;
  opt.seed = seed;
  opt.resume[robot] = file;
  const auto result = app::run_scenario(cfg, opt);
  print_summary(result);
  return result.metrics.aborted ? 2 : 0;
}

int cmd_hub(const std::string& bind, std::uint16_t tcp, std::uint16_t ws, bool with_merger, double cadence) {
  net::Hub hub;
  net::HubServer server(hub, {bind, tcp, ws, true});
  server.start();
  std::cout << "hub on " << bind << " tcp " << server.tcp_port() << ", websocket " << server.ws_port() << std::endl;
  std::unique_ptr<net::InprocLink> link;
  std::unique_ptr<net::MergerService> merger;
  std::thread merger_thread;
  if (with_merger) {
    link = std::make_unique<net::InprocLink>(hub, net::Hello{net::Role::Merger, "", "merger"});
    merger = std::make_unique<net::MergerService>(*link, net::MergerConfig{cadence, {}});
    merger_thread = std::thread([&] { merger->run(g_stop); });
  }
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  if (merger_thread.joinable()) merger_thread.join();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });

  CLI::App cli{"quadslam: simulated quadruped SLAM, map merging and hub"};
  cli.require_subcommand(1);

  std::string cfg_path, out = "out", transport;
  std::optional<std::uint64_t> seed;
  bool teleop = false;
  auto* run = cli.add_subcommand("run", "Run a scenario and write artifacts");
  run->add_option("scenario", cfg_path, "Scenario config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Artifact directory");
  run->add_flag("--teleop", teleop, "Drive every robot from <ns>/cmd_vel in real time");
  run->add_option("--transport", transport, "inproc or tcp")->check(CLI::IsMember({"inproc", "tcp"}));

  std::vector<std::string> maps;
  auto* merge = cli.add_subcommand("merge", "Merge exported maps offline");
  merge->add_option("maps", maps, "Exported maps (.pgm, .meta or stem)")->required();
  merge->add_option("--out", out, "Output directory");

  double at = 0.0;
  auto* exp = cli.add_subcommand("export-graph", "Run a scenario until a time and save every pose graph");
  exp->add_option("scenario", cfg_path, "Scenario config")->required()->check(CLI::ExistingFile);
  exp->add_option("--at", at, "Simulated time of the save (s)")->required();
  exp->add_option("--seed", seed, "Override the scenario seed");
  exp->add_option("--out", out, "Output directory");

  std::string file, robot;
  auto* res = cli.add_subcommand("resume-graph", "Continue a scenario from a saved pose graph");
  res->add_option("file", file, "Saved graph")->required()->check(CLI::ExistingFile);
  res->add_option("--scenario", cfg_path, "Scenario the graph came from")->required()->check(CLI::ExistingFile);
  res->add_option("--robot", robot, "Robot namespace (default: first graph robot)");
  res->add_option("--seed", seed, "Override the scenario seed");
  res->add_option("--out", out, "Artifact directory");

  std::string bind = "127.0.0.1";
  std::uint16_t tcp = net::kDefaultTcpPort, ws = net::kDefaultWsPort;
  bool with_merger = false;
  double cadence = 2.0;
  auto* hub = cli.add_subcommand("hub", "Run a standalone hub until interrupted");
  hub->add_option("--bind", bind, "Bind address");
  hub->add_option("--tcp-port", tcp, "Framed TCP port");
  hub->add_option("--ws-port", ws, "WebSocket port");
  hub->add_flag("--merger", with_merger, "Also run the map merger");
  hub->add_option("--cadence", cadence, "Merger cadence (s)");

  CLI11_PARSE(cli, argc, argv);
  try {
    if (*run) return cmd_run(cfg_path, seed, out, teleop, transport);
    if (*merge) return cmd_merge(maps, out);
    if (*exp) return cmd_export_graph(cfg_path, at, seed, out);
    if (*res) return cmd_resume_graph(file, cfg_path, robot, seed, out);
    if (*hub) return cmd_hub(bind, tcp, ws, with_merger, cadence);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
