#include "quadslam/slam/graph_io.hpp"

#include "quadslam/core/bytes.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace quadslam::slam {

namespace {

constexpr std::uint32_t kMagic = 0x52475051;  // "QPGR"

void put_pose(ByteWriter& w, const Pose2& p) {
  w.f64(p.x);
  w.f64(p.y);
  w.f64(p.theta);
}

Pose2 get_pose(ByteReader& r) {
  Pose2 p;
  p.x = r.f64();
  p.y = r.f64();
  p.theta = r.f64();
  return p;
}

std::uint32_t crc(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(crc32(0L, b.data(), static_cast<uInt>(b.size())));
}

}  // namespace

std::vector<std::uint8_t> serialize(const PoseGraph& g) {
  ByteWriter body;
  body.u64(g.config_hash);
  body.i64(g.anchor());
  body.i64(g.next_id());
  put_pose(body, g.pending_odometry);
  body.f64(g.clock);
  body.u32(static_cast<std::uint32_t>(g.nodes().size()));
  for (const auto& n : g.nodes()) {
    body.i64(n.id);
    put_pose(body, n.pose);
    body.f64(n.scan.timestamp);
    body.f64(n.scan.angle_min);
    body.f64(n.scan.angle_increment);
    body.f64(n.scan.range_min);
    body.f64(n.scan.range_max);
    body.u32(static_cast<std::uint32_t>(n.scan.ranges.size()));
    for (double r : n.scan.ranges) body.f64(r);
  }
  body.u32(static_cast<std::uint32_t>(g.edges().size()));
  for (const auto& e : g.edges()) {
    body.i64(e.from);
    body.i64(e.to);
    put_pose(body, e.measurement);
    for (int i = 0; i < 9; ++i) body.f64(e.information(i / 3, i % 3));
    body.u8(static_cast<std::uint8_t>(e.kind));
  }
  const auto b = body.take();
  ByteWriter out;
  out.u32(kMagic);
  out.u32(kGraphFormatVersion);
  out.u64(b.size());
  out.bytes(b);
  out.u32(crc(b));
  return out.take();
}

PoseGraph deserialize(std::span<const std::uint8_t> bytes) {
  using C = GraphFormatErrorCode;
  try {
    ByteReader head(bytes);
    if (head.u32() != kMagic) throw GraphFormatError(C::BadMagic, "not a pose-graph file");
    const auto version = head.u32();
    if (version != kGraphFormatVersion)
      throw GraphFormatError(C::VersionMismatch, "unsupported pose-graph version " + std::to_string(version));
    const auto len = head.u64();
    if (len > head.remaining() || head.remaining() - len < 4)
      throw GraphFormatError(C::Truncated, "pose-graph payload is truncated");
    const auto body = head.bytes(static_cast<std::size_t>(len));
    const auto stored = head.u32();
    if (head.remaining() != 0) throw GraphFormatError(C::Malformed, "trailing bytes after pose graph");
    if (crc(body) != stored) throw GraphFormatError(C::Checksum, "pose-graph checksum mismatch");

    ByteReader r(body);
    PoseGraph g;
    g.config_hash = r.u64();
    const auto anchor = static_cast<int>(r.i64());
    const auto next_id = static_cast<int>(r.i64());
    g.pending_odometry = get_pose(r);
    g.clock = r.f64();
    std::vector<PoseGraphNode> nodes(r.u32());
    int last = -1;
    for (auto& n : nodes) {
      n.id = static_cast<int>(r.i64());
      if (n.id <= last || n.id >= next_id) throw GraphFormatError(C::Malformed, "node ids out of order");
      last = n.id;
      n.pose = get_pose(r);
      n.scan.timestamp = r.f64();
      n.scan.angle_min = r.f64();
      n.scan.angle_increment = r.f64();
      n.scan.range_min = r.f64();
      n.scan.range_max = r.f64();
      const auto count = r.u32();
      if (static_cast<std::size_t>(count) * 8 > r.remaining())
        throw GraphFormatError(C::Malformed, "scan length exceeds payload");
      n.scan.ranges.resize(count);
      for (auto& v : n.scan.ranges) v = r.f64();
    }
    std::vector<PoseGraphEdge> edges(r.u32());
    for (auto& e : edges) {
      e.from = static_cast<int>(r.i64());
      e.to = static_cast<int>(r.i64());
      e.measurement = get_pose(r);
      for (int i = 0; i < 9; ++i) e.information(i / 3, i % 3) = r.f64();
      const auto kind = r.u8();
      if (kind > 2) throw GraphFormatError(C::Malformed, "unknown edge kind");
      e.kind = static_cast<EdgeKind>(kind);
    }
    if (r.remaining() != 0) throw GraphFormatError(C::Malformed, "unexpected bytes in pose-graph body");
    g.restore(std::move(nodes), std::move(edges), anchor, next_id);
    if (!g.empty() && !g.index_of(anchor)) throw GraphFormatError(C::Malformed, "anchor node missing");
    for (const auto& e : g.edges())
      if (!g.index_of(e.from) || !g.index_of(e.to)) throw GraphFormatError(C::Malformed, "edge references missing node");
    return g;
  } catch (const TruncatedInput&) {
    throw GraphFormatError(C::Truncated, "pose-graph payload is truncated");
  }
}

void save_graph(const PoseGraph& g, const std::filesystem::path& path) {
  const auto bytes = serialize(g);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

PoseGraph load_graph(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f), {}};
  return deserialize(bytes);
}

}  // namespace quadslam::slam
