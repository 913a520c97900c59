#pragma once

#include "quadslam/gait/gait.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quadslam::gait {

/// Servo targets in whole degrees; each value lies in [0, 180].
class ServoCommand {
 public:
  static constexpr int kMaxDegrees = 180;

  ServoCommand() = default;
  /// Throws std::out_of_range if any angle exceeds 180.
  explicit ServoCommand(const std::array<std::uint8_t, kJointCount>& degrees);

  std::uint8_t operator[](std::size_t i) const { return degrees_[i]; }
  const std::array<std::uint8_t, kJointCount>& degrees() const { return degrees_; }

  bool operator==(const ServoCommand&) const = default;

 private:
  std::array<std::uint8_t, kJointCount> degrees_{};
};

struct CalibrationTable {
  JointAngles zero_pose{};
  JointAngles offsets{};

  static CalibrationTable neutral();
  /// Throws std::invalid_argument when any zero_pose + offset leaves [0, 180].
  void validate() const;
};

std::string_view joint_name(std::size_t index);

/// Reads 12 lines of `joint_name zero offset`; `#` comments allowed.
CalibrationTable parse_calibration(const std::string& text);
CalibrationTable load_calibration(const std::filesystem::path& path);

/// angle = clamp(round(raw + zero_pose + offset), 0, 180) per joint.
ServoCommand apply_calibration(const JointAngles& raw, const CalibrationTable& cal);

// HL→LL wire frame: sync byte, 12 angle bytes, checksum (sum of angle bytes mod 256).
inline constexpr std::uint8_t kFrameSync = 0xA5;
inline constexpr std::size_t kFrameSize = 14;
using LlFrame = std::array<std::uint8_t, kFrameSize>;

enum class FrameError { WrongLength, BadSync, BadChecksum, AngleOutOfRange };

class FrameDecodeError : public std::runtime_error {
 public:
  FrameDecodeError(FrameError code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  FrameError code() const { return code_; }

 private:
  FrameError code_;
};

LlFrame ll_encode(const ServoCommand& cmd);
/// Throws FrameDecodeError.
ServoCommand ll_decode(std::span<const std::uint8_t> frame);

}  // namespace quadslam::gait
