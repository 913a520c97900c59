#include "quadslam/net/merger_service.hpp"

#include <thread>

namespace quadslam::net {

MergerService::MergerService(HubLink& link, MergerConfig cfg) : link_(link), cfg_(std::move(cfg)) {
  link_.subscribe("*/map");
}

void MergerService::drain() {
  link_.sync();
  while (auto env = link_.next(std::chrono::milliseconds(0))) {
    if (env->payload_type != PayloadType::Map) continue;
    const std::string ns(topic_namespace(env->topic));
    if (ns == kMergedNamespace) continue;
    latest_[ns] = env;
  }
}

MergerTick MergerService::tick(double timestamp) {
  drain();
  MergerTick out;
  std::vector<std::string> names;
  std::vector<mapping::OccupancyGrid> grids;
  std::vector<std::string> unreadable;
  for (const auto& [ns, env] : latest_) {
    try {
      grids.push_back(decode_map(env->payload));
      names.push_back(ns);
    } catch (const HubError&) {
      unreadable.push_back(ns);
    }
  }
  if (grids.empty()) {
    link_.send("merged/status", PayloadType::Status,
               encode_json({{"state", "waiting"}, {"maps", 0}, {"unreadable", unreadable}}), timestamp);
    return out;
  }

  auto result = merge::merge_maps(grids, cfg_.merge);
  out.merged = true;
  out.maps = grids.size();
  out.anchor = names.front();
  out.transforms.anchor = out.anchor;
  for (std::size_t i = 0; i < names.size(); ++i) {
    TransformEntry e;
    e.ns = names[i];
    if (const auto& t = result.transforms[i]) {
      e.aligned = true;
      e.transform = t->transform;
      e.inliers = t->inlier_count;
      e.matched = t->matched_count;
      e.confidence = t->confidence;
    }
    out.transforms.entries.push_back(e);
  }
  for (auto i : result.excluded) out.excluded.push_back(names[i]);

  link_.send("merged/map", PayloadType::Map, encode_map(result.merged), timestamp);
  link_.send("merged/transforms", PayloadType::TransformSet, encode_transform_set(out.transforms), timestamp);
  link_.send("merged/status", PayloadType::Status,
             encode_json({{"state", "merged"},
                          {"maps", out.maps},
                          {"anchor", out.anchor},
                          {"excluded", out.excluded},
                          {"unreadable", unreadable}}),
             timestamp);
  merged_ = std::move(result.merged);
  return out;
}

void MergerService::run(const std::atomic<bool>& stop) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto due = start;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(cfg_.cadence));
  while (!stop.load()) {
    const auto now = clock::now();
    if (now >= due) {
      tick(std::chrono::duration<double>(now - start).count());
      due += period;
      if (due < now) due = now + period;
    }
    std::this_thread::sleep_for(std::min<clock::duration>(due - clock::now(), std::chrono::milliseconds(50)));
  }
}

}  // namespace quadslam::net
