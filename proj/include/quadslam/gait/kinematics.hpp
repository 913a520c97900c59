#pragma once

#include <stdexcept>

namespace quadslam::gait {

class OutOfWorkspace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LegAngles {
  double thigh_deg{0.0};
  double shin_deg{0.0};
};

struct FootPosition {
  double forward{0.0};
  double down{0.0};
};

/// Planar two-link inverse kinematics in the hip's sagittal plane, knee-backward
/// branch. Thigh angle is measured from straight down (positive toward
/// forward); shin angle is the knee flexion, 0 when fully extended.
/// Throws OutOfWorkspace when |l1 - l2| <= r <= l1 + l2 does not hold.
LegAngles leg_ik(double foot_forward, double foot_down, double l1, double l2);

FootPosition leg_fk(const LegAngles& angles, double l1, double l2);

}  // namespace quadslam::gait
