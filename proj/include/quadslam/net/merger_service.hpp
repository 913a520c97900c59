#pragma once

#include "quadslam/merge/map_merge.hpp"
#include "quadslam/net/link.hpp"
#include "quadslam/net/payloads.hpp"

#include <atomic>
#include <map>

namespace quadslam::net {

struct MergerConfig {
  double cadence{2.0};  // s
  merge::MergeConfig merge;
};

struct MergerTick {
  bool merged{false};
  std::size_t maps{0};
  std::string anchor;
  std::vector<std::string> excluded;
  TransformSet transforms;
};

/// Subscribes to every robot's latched map and, per tick, merges the newest
/// of each, anchored on the alphabetically first namespace. Holds no state a
/// restart would lose: the latched maps are re-delivered on subscribe.
class MergerService {
 public:
  MergerService(HubLink& link, MergerConfig cfg = {});

  /// Drains deliveries, then publishes merged/map, merged/transforms and
  /// merged/status; with no maps only a "waiting" status is published.
  MergerTick tick(double timestamp);
  /// Ticks every `cadence` seconds of wall time until `stop` is set.
  void run(const std::atomic<bool>& stop);

  const std::optional<mapping::OccupancyGrid>& merged() const { return merged_; }

 private:
  void drain();

  HubLink& link_;
  MergerConfig cfg_;
  std::map<std::string, EnvelopePtr> latest_;  // namespace -> newest map
  std::optional<mapping::OccupancyGrid> merged_;
};

}  // namespace quadslam::net
