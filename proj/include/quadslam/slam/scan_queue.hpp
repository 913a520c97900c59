#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/slam/graph_slam.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace quadslam::slam {

struct ScanItem {
  Pose2 odom_delta;
  LaserScan scan;
};

/// Hand-off between a sensor pipeline (single producer) and a mapping worker
/// (single consumer). Synchronous mode keeps every item and blocks the
/// producer when full. Asynchronous mode never blocks: it keeps only the
/// latest unprocessed scan, folding the odometry of replaced items into it.
class ScanQueue {
 public:
  explicit ScanQueue(MappingMode mode, std::size_t capacity = 16);

  /// Returns false once closed.
  bool push(ScanItem item);
  /// Blocks until an item is available; nullopt after close() and drain.
  std::optional<ScanItem> pop();
  void close();

  MappingMode mode() const { return mode_; }
  std::uint64_t dropped() const;

 private:
  MappingMode mode_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<ScanItem> items_;
  bool closed_{false};
  std::uint64_t dropped_{0};
};

}  // namespace quadslam::slam
