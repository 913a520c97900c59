#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/core/scan.hpp"
#include "quadslam/mapping/occupancy_grid.hpp"
#include "quadslam/net/wire.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace quadslam::net {

// Payload bodies. Maps use the binary map body; everything else is UTF-8 JSON.
// Decoders throw HubError(Malformed).

std::vector<std::uint8_t> encode_map(const mapping::OccupancyGrid& grid);
mapping::OccupancyGrid decode_map(std::span<const std::uint8_t> bytes);

struct PoseMessage {
  double timestamp{0.0};
  Pose2 pose;
};
std::vector<std::uint8_t> encode_pose(const PoseMessage& p);
PoseMessage decode_pose(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_twist(const Twist2& t);
Twist2 decode_twist(std::span<const std::uint8_t> bytes);

/// Ranges without a return are written as null.
std::vector<std::uint8_t> encode_scan(const LaserScan& s);
LaserScan decode_scan(std::span<const std::uint8_t> bytes);

struct TransformEntry {
  std::string ns;
  bool aligned{false};
  Pose2 transform;  // robot map frame into the anchor's
  int inliers{0};
  int matched{0};
  double confidence{0.0};
};

struct TransformSet {
  std::string anchor;
  std::vector<TransformEntry> entries;
};
std::vector<std::uint8_t> encode_transform_set(const TransformSet& t);
TransformSet decode_transform_set(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_json(const Json& j);
Json decode_json(std::span<const std::uint8_t> bytes);

}  // namespace quadslam::net
