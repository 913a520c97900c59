#pragma once

#include "quadslam/mapping/occupancy_grid.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace quadslam::mapping {

class MapIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kPgmOccupied = 0;
inline constexpr std::uint8_t kPgmFree = 254;
inline constexpr std::uint8_t kPgmUnknown = 205;

/// Log-odds magnitude assigned to occupied/free cells when importing a
/// ternary image.
inline constexpr double kImportedEvidence = 2.0;

struct ExportedMapPaths {
  std::filesystem::path image;
  std::filesystem::path metadata;
};

/// Writes `<stem>.pgm` (binary P5, row 0 = top) and `<stem>.meta` (resolution,
/// origin, thresholds). Throws MapIoError when the files cannot be written.
ExportedMapPaths export_map(const OccupancyGrid& grid, const std::filesystem::path& stem);

/// Reads a map written by export_map; accepts the `.pgm`, the `.meta`, or the
/// bare stem.
OccupancyGrid import_map(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_pgm(const OccupancyGrid& grid);

/// Binary map body carried in `map` envelopes: full log-odds grid.
std::vector<std::uint8_t> encode_map_binary(const OccupancyGrid& grid);
/// Throws MapIoError on malformed input.
OccupancyGrid decode_map_binary(std::span<const std::uint8_t> bytes);

}  // namespace quadslam::mapping
