#include "quadslam/gait/servo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace quadslam::gait {

namespace {
constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "fl_shoulder", "fl_thigh", "fl_shin", "fr_shoulder", "fr_thigh", "fr_shin",
    "rl_shoulder", "rl_thigh", "rl_shin", "rr_shoulder", "rr_thigh", "rr_shin"};
}

ServoCommand::ServoCommand(const std::array<std::uint8_t, kJointCount>& degrees)
    : degrees_(degrees) {
  for (auto d : degrees_)
    if (d > kMaxDegrees) throw std::out_of_range("servo angle above 180 degrees");
}

std::string_view joint_name(std::size_t index) { return kJointNames.at(index); }

CalibrationTable CalibrationTable::neutral() {
  CalibrationTable cal;
  for (std::size_t leg = 0; leg < kLegCount; ++leg) {
    cal.zero_pose[leg * 3 + 0] = 90.0;
    cal.zero_pose[leg * 3 + 1] = 90.0;
    cal.zero_pose[leg * 3 + 2] = 30.0;
  }
  return cal;
}

void CalibrationTable::validate() const {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const double v = zero_pose[i] + offsets[i];
    if (v < 0.0 || v > 180.0)
      throw std::invalid_argument("calibration for " + std::string(kJointNames[i]) +
                                  " leaves the servo range");
  }
}

CalibrationTable parse_calibration(const std::string& text) {
  CalibrationTable cal;
  std::array<bool, kJointCount> seen{};
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    double zero, offset;
    if (!(ls >> zero >> offset))
      throw std::invalid_argument("calibration: expected `joint_name zero offset` for " + name);
    const auto it = std::find(kJointNames.begin(), kJointNames.end(), name);
    if (it == kJointNames.end()) throw std::invalid_argument("calibration: unknown joint " + name);
    const auto idx = static_cast<std::size_t>(it - kJointNames.begin());
    if (seen[idx]) throw std::invalid_argument("calibration: duplicate joint " + name);
    seen[idx] = true;
    cal.zero_pose[idx] = zero;
    cal.offsets[idx] = offset;
  }
  for (std::size_t i = 0; i < kJointCount; ++i)
    if (!seen[i]) throw std::invalid_argument("calibration: missing joint " + std::string(kJointNames[i]));
  cal.validate();
  return cal;
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open calibration file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_calibration(ss.str());
}

ServoCommand apply_calibration(const JointAngles& raw, const CalibrationTable& cal) {
  std::array<std::uint8_t, kJointCount> out{};
  for (std::size_t i = 0; i < kJointCount; ++i) {
    double v = raw[i] + cal.zero_pose[i] + cal.offsets[i];
    if (std::isnan(v)) v = cal.zero_pose[i] + cal.offsets[i];
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 180.0)));
  }
  return ServoCommand(out);
}

LlFrame ll_encode(const ServoCommand& cmd) {
  LlFrame f{};
  f[0] = kFrameSync;
  unsigned sum = 0;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    f[i + 1] = cmd[i];
    sum += cmd[i];
  }
  f[kFrameSize - 1] = static_cast<std::uint8_t>(sum & 0xFFu);
  return f;
}

ServoCommand ll_decode(std::span<const std::uint8_t> frame) {
  if (frame.size() != kFrameSize)
    throw FrameDecodeError(FrameError::WrongLength,
                           "LL frame has " + std::to_string(frame.size()) + " bytes, expected 14");
  if (frame[0] != kFrameSync) throw FrameDecodeError(FrameError::BadSync, "LL frame sync byte mismatch");
  unsigned sum = 0;
  std::array<std::uint8_t, kJointCount> deg{};
  for (std::size_t i = 0; i < kJointCount; ++i) {
    deg[i] = frame[i + 1];
    sum += deg[i];
  }
  if (static_cast<std::uint8_t>(sum & 0xFFu) != frame[kFrameSize - 1])
    throw FrameDecodeError(FrameError::BadChecksum, "LL frame checksum mismatch");
  for (auto d : deg)
    if (d > ServoCommand::kMaxDegrees)
      throw FrameDecodeError(FrameError::AngleOutOfRange, "LL frame angle above 180");
  return ServoCommand(deg);
}

}  // namespace quadslam::gait
