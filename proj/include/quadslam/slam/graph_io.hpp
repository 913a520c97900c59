#pragma once

#include "quadslam/slam/pose_graph.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace quadslam::slam {

enum class GraphFormatErrorCode { BadMagic, VersionMismatch, Truncated, Checksum, Malformed };

class GraphFormatError : public std::runtime_error {
 public:
  GraphFormatError(GraphFormatErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  GraphFormatErrorCode code() const { return code_; }

 private:
  GraphFormatErrorCode code_;
};

inline constexpr std::uint32_t kGraphFormatVersion = 1;

/// magic "QPGR" | u32 version | u64 body length | body | u32 CRC-32 of body.
std::vector<std::uint8_t> serialize(const PoseGraph& g);
PoseGraph deserialize(std::span<const std::uint8_t> bytes);

void save_graph(const PoseGraph& g, const std::filesystem::path& path);
PoseGraph load_graph(const std::filesystem::path& path);

}  // namespace quadslam::slam
