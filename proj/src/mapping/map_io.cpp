#include "quadslam/mapping/map_io.hpp"

#include "quadslam/core/bytes.hpp"

#include <fstream>
#include <sstream>

namespace quadslam::mapping {

namespace {

constexpr std::uint32_t kMapMagic = 0x50414D51;  // "QMAP"
constexpr std::uint32_t kMapVersion = 1;

std::uint8_t pixel(CellClass c) {
  switch (c) {
    case CellClass::Occupied: return kPgmOccupied;
    case CellClass::Free: return kPgmFree;
    default: return kPgmUnknown;
  }
}

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  if (p.extension() == ".pgm" || p.extension() == ".meta") p.replace_extension();
  p += ext;
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_pgm(const OccupancyGrid& grid) {
  std::ostringstream header;
  header << "P5\n" << grid.width() << ' ' << grid.height() << "\n255\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + grid.cell_count());
  for (int row = 0; row < grid.height(); ++row) {
    const int iy = grid.height() - 1 - row;
    for (int ix = 0; ix < grid.width(); ++ix) out.push_back(pixel(grid.classify(ix, iy)));
  }
  return out;
}

ExportedMapPaths export_map(const OccupancyGrid& grid, const std::filesystem::path& stem) {
  ExportedMapPaths paths{with_ext(stem, ".pgm"), with_ext(stem, ".meta")};
  {
    std::ofstream f(paths.image, std::ios::binary);
    if (!f) throw MapIoError("cannot write " + paths.image.string());
    const auto bytes = encode_pgm(grid);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw MapIoError("failed writing " + paths.image.string());
  }
  std::ofstream m(paths.metadata);
  if (!m) throw MapIoError("cannot write " + paths.metadata.string());
  m.precision(17);
  m << "image: " << paths.image.filename().string() << '\n'
    << "resolution: " << grid.resolution() << '\n'
    << "origin: " << grid.origin().x << ' ' << grid.origin().y << ' ' << grid.origin().theta << '\n'
    << "occupied_thresh: " << grid.params().occupied_threshold << '\n'
    << "free_thresh: " << grid.params().free_threshold << '\n';
  if (!m) throw MapIoError("failed writing " + paths.metadata.string());
  return paths;
}

OccupancyGrid import_map(const std::filesystem::path& path) {
  const auto meta_path = with_ext(path, ".meta");
  std::ifstream m(meta_path);
  if (!m) throw MapIoError("cannot open " + meta_path.string());
  std::string key, image;
  double resolution = 0.0;
  Pose2 origin;
  LogOddsParams params;
  while (m >> key) {
    if (key == "image:") m >> image;
    else if (key == "resolution:") m >> resolution;
    else if (key == "origin:") m >> origin.x >> origin.y >> origin.theta;
    else if (key == "occupied_thresh:") m >> params.occupied_threshold;
    else if (key == "free_thresh:") m >> params.free_threshold;
    else throw MapIoError("unknown metadata key " + key);
  }
  if (image.empty() || !(resolution > 0.0)) throw MapIoError("incomplete metadata in " + meta_path.string());

  const auto image_path = meta_path.parent_path() / image;
  std::ifstream f(image_path, std::ios::binary);
  if (!f) throw MapIoError("cannot open " + image_path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w < 0 || h < 0 || maxval != 255) throw MapIoError("not an 8-bit P5 image");
  f.get();
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  f.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (f.gcount() != static_cast<std::streamsize>(px.size())) throw MapIoError("truncated image data");

  OccupancyGrid grid(resolution, w, h, origin, params);
  for (int row = 0; row < h; ++row)
    for (int ix = 0; ix < w; ++ix) {
      const auto v = px[static_cast<std::size_t>(row) * static_cast<std::size_t>(w) + static_cast<std::size_t>(ix)];
      const int iy = h - 1 - row;
      if (v == kPgmOccupied) grid.set(ix, iy, kImportedEvidence);
      else if (v == kPgmFree) grid.set(ix, iy, -kImportedEvidence);
    }
  return grid;
}

std::vector<std::uint8_t> encode_map_binary(const OccupancyGrid& grid) {
  ByteWriter w;
  w.u32(kMapMagic);
  w.u32(kMapVersion);
  w.u32(static_cast<std::uint32_t>(grid.width()));
  w.u32(static_cast<std::uint32_t>(grid.height()));
  w.f64(grid.resolution());
  w.f64(grid.origin().x);
  w.f64(grid.origin().y);
  w.f64(grid.origin().theta);
  const auto& p = grid.params();
  for (double v : {p.hit, p.miss, p.min, p.max, p.occupied_threshold, p.free_threshold}) w.f64(v);
  for (double v : grid.data()) w.f64(v);
  return w.take();
}

OccupancyGrid decode_map_binary(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    if (r.u32() != kMapMagic) throw MapIoError("map body: bad magic");
    if (r.u32() != kMapVersion) throw MapIoError("map body: unsupported version");
    const auto w = r.u32(), h = r.u32();
    const double res = r.f64();
    Pose2 origin;
    origin.x = r.f64();
    origin.y = r.f64();
    origin.theta = r.f64();
    LogOddsParams p;
    p.hit = r.f64();
    p.miss = r.f64();
    p.min = r.f64();
    p.max = r.f64();
    p.occupied_threshold = r.f64();
    p.free_threshold = r.f64();
    if (static_cast<std::uint64_t>(w) * h * 8 != r.remaining()) throw MapIoError("map body: size mismatch");
    OccupancyGrid grid(res, static_cast<int>(w), static_cast<int>(h), origin, p);
    for (auto& v : grid.data()) v = r.f64();
    return grid;
  } catch (const TruncatedInput&) {
    throw MapIoError("map body: truncated");
  } catch (const std::invalid_argument& e) {
    throw MapIoError(std::string("map body: ") + e.what());
  }
}

}  // namespace quadslam::mapping
