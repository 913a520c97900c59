#include "quadslam/gait/gait.hpp"

#include <cmath>
#include <stdexcept>

namespace quadslam::gait {

void GaitParams::validate() const {
  if (!(cycle_period > 0.0)) throw std::invalid_argument("gait: cycle_period must be > 0");
  if (!(duty_factor > 0.0 && duty_factor < 1.0))
    throw std::invalid_argument("gait: duty_factor must lie in (0,1)");
  if (!(l1 > 0.0 && l2 > 0.0)) throw std::invalid_argument("gait: link lengths must be > 0");
  if (!(step_height >= 0.0 && step_height < l1 + l2 - stance_depth))
    throw std::invalid_argument("gait: step_height must be < l1 + l2 - stance_depth");
}

double leg_phase(Leg leg, double phase) {
  const bool second_pair = leg == Leg::FrontRight || leg == Leg::RearLeft;
  double p = phase + (second_pair ? 0.5 : 0.0);
  p -= std::floor(p);
  return p;
}

JointAngles twist_to_joints(const Twist2& cmd, double phase, const GaitParams& params) {
  JointAngles out{};
  const bool moving = !cmd.is_zero();
  const double stance_time = params.duty_factor * params.cycle_period;

  for (std::size_t i = 0; i < kLegCount; ++i) {
    const Leg leg = static_cast<Leg>(i);
    const double hx = (leg == Leg::FrontLeft || leg == Leg::FrontRight) ? params.hip_offset_x
                                                                         : -params.hip_offset_x;
    const double hy = (leg == Leg::FrontLeft || leg == Leg::RearLeft) ? params.hip_offset_y
                                                                       : -params.hip_offset_y;
    // Hip velocity in the body frame; stance feet sweep opposite to it.
    const double v_fwd = cmd.vx - cmd.wz * hy;
    const double v_lat = cmd.vy + cmd.wz * hx;

    // Normalized sweep: +0.5 at touchdown, -0.5 at liftoff.
    double sweep = 0.0;
    double lift = 0.0;
    if (moving) {
      const double lp = leg_phase(leg, phase);
      if (lp < params.duty_factor) {
        sweep = 0.5 - lp / params.duty_factor;
      } else {
        const double s = (lp - params.duty_factor) / (1.0 - params.duty_factor);
        sweep = -0.5 + s;
        const double hump = std::sin(kPi * s);
        lift = params.step_height * hump * hump;
      }
    }

    const double stride = v_fwd * stance_time;
    const LegAngles a =
        leg_ik(stride * sweep, params.stance_depth - lift, params.l1, params.l2);
    out[joint_index(leg, Joint::Shoulder)] = params.shoulder_gain * v_lat * 2.0 * sweep;
    out[joint_index(leg, Joint::Thigh)] = a.thigh_deg;
    out[joint_index(leg, Joint::Shin)] = a.shin_deg;
  }
  return out;
}

}  // namespace quadslam::gait
