#include "quadslam/net/payloads.hpp"

#include "quadslam/mapping/map_io.hpp"

namespace quadslam::net {

std::vector<std::uint8_t> encode_map(const mapping::OccupancyGrid& grid) { return mapping::encode_map_binary(grid); }

mapping::OccupancyGrid decode_map(std::span<const std::uint8_t> bytes) {
  try {
    return mapping::decode_map_binary(bytes);
  } catch (const mapping::MapIoError& e) {
    throw HubError(HubErrorCode::Malformed, std::string("bad map payload: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_json(const Json& j) {
  const std::string s = j.dump();
  return {s.begin(), s.end()};
}

Json decode_json(std::span<const std::uint8_t> bytes) {
  Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw HubError(HubErrorCode::Malformed, "payload is not JSON");
  return j;
}

namespace {

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw HubError(HubErrorCode::Malformed, std::string("bad payload: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_pose(const PoseMessage& p) {
  return encode_json({{"timestamp", p.timestamp}, {"x", p.pose.x}, {"y", p.pose.y}, {"theta", p.pose.theta}});
}

PoseMessage decode_pose(std::span<const std::uint8_t> bytes) {
  const Json j = decode_json(bytes);
  return guarded([&] {
    return PoseMessage{j.at("timestamp").get<double>(),
                       Pose2{j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()}};
  });
}

std::vector<std::uint8_t> encode_twist(const Twist2& t) { return encode_json({{"vx", t.vx}, {"vy", t.vy}, {"wz", t.wz}}); }

Twist2 decode_twist(std::span<const std::uint8_t> bytes) {
  const Json j = decode_json(bytes);
  return guarded([&] { return Twist2{j.at("vx").get<double>(), j.at("vy").get<double>(), j.at("wz").get<double>()}; });
}

std::vector<std::uint8_t> encode_scan(const LaserScan& s) {
  Json ranges = Json::array();
  for (double r : s.ranges) ranges.push_back(has_return(r) ? Json(r) : Json(nullptr));
  return encode_json({{"timestamp", s.timestamp},
                      {"angle_min", s.angle_min},
                      {"angle_increment", s.angle_increment},
                      {"range_min", s.range_min},
                      {"range_max", s.range_max},
                      {"ranges", ranges}});
}

LaserScan decode_scan(std::span<const std::uint8_t> bytes) {
  const Json j = decode_json(bytes);
  return guarded([&] {
    LaserScan s;
    s.timestamp = j.at("timestamp").get<double>();
    s.angle_min = j.at("angle_min").get<double>();
    s.angle_increment = j.at("angle_increment").get<double>();
    s.range_min = j.at("range_min").get<double>();
    s.range_max = j.at("range_max").get<double>();
    for (const auto& r : j.at("ranges")) s.ranges.push_back(r.is_null() ? kNoReturn : r.get<double>());
    return s;
  });
}

std::vector<std::uint8_t> encode_transform_set(const TransformSet& t) {
  Json entries = Json::array();
  for (const auto& e : t.entries)
    entries.push_back({{"namespace", e.ns},
                       {"aligned", e.aligned},
                       {"x", e.transform.x},
                       {"y", e.transform.y},
                       {"theta", e.transform.theta},
                       {"inliers", e.inliers},
                       {"matched", e.matched},
                       {"confidence", e.confidence}});
  return encode_json({{"anchor", t.anchor}, {"entries", entries}});
}

TransformSet decode_transform_set(std::span<const std::uint8_t> bytes) {
  const Json j = decode_json(bytes);
  return guarded([&] {
    TransformSet t;
    t.anchor = j.at("anchor").get<std::string>();
    for (const auto& e : j.at("entries")) {
      TransformEntry te;
      te.ns = e.at("namespace").get<std::string>();
      te.aligned = e.at("aligned").get<bool>();
      te.transform = Pose2{e.at("x").get<double>(), e.at("y").get<double>(), e.at("theta").get<double>()};
      te.inliers = e.at("inliers").get<int>();
      te.matched = e.at("matched").get<int>();
      te.confidence = e.at("confidence").get<double>();
      t.entries.push_back(std::move(te));
    }
    return t;
  });
}

}  // namespace quadslam::net
