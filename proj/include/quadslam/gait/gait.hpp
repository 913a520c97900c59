#pragma once

#include "quadslam/core/geometry.hpp"
#include "quadslam/gait/kinematics.hpp"

#include <array>
#include <cstddef>
#include <cstdint>

namespace quadslam::gait {

inline constexpr std::size_t kLegCount = 4;
inline constexpr std::size_t kJointCount = 12;

enum class Leg : std::size_t { FrontLeft = 0, FrontRight = 1, RearLeft = 2, RearRight = 3 };
enum class Joint : std::size_t { Shoulder = 0, Thigh = 1, Shin = 2 };

constexpr std::size_t joint_index(Leg leg, Joint joint) {
  return static_cast<std::size_t>(leg) * 3 + static_cast<std::size_t>(joint);
}

/// Uncalibrated joint-local angles in degrees, 4 legs × (shoulder, thigh, shin).
using JointAngles = std::array<double, kJointCount>;

struct GaitParams {
  double cycle_period{0.8};   // s
  double duty_factor{0.5};    // stance fraction of the cycle
  double step_height{0.015};   // m
  double stance_depth{0.13};  // m, hip to foot in neutral stance
  double l1{0.09};            // m
  double l2{0.09};            // m
  double hip_offset_x{0.15};  // m, hip distance ahead of / behind body center
  double hip_offset_y{0.06};  // m, hip distance left / right of body center
  double shoulder_gain{30.0}; // deg per (m/s) of lateral foot velocity

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// Diagonal-pair trot. FL+RR share phase; FR+RL run half a cycle behind.
/// Throws OutOfWorkspace when the params put a foot target out of reach.
JointAngles twist_to_joints(const Twist2& cmd, double phase, const GaitParams& params);

/// Phase of a single leg (in [0,1)) given the gait phase.
double leg_phase(Leg leg, double phase);

}  // namespace quadslam::gait
