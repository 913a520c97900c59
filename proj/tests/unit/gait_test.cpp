#include <doctest.h>

#include "quadslam/gait/gait.hpp"
#include "quadslam/gait/kinematics.hpp"
#include "quadslam/gait/ll_link.hpp"
#include "quadslam/gait/servo.hpp"

#include <cmath>
#include <random>

using namespace quadslam;
using namespace quadslam::gait;

TEST_CASE("leg_ik: workspace boundary and right angle") {
  const auto straight = leg_ik(0.0, 0.18, 0.09, 0.09);
  CHECK(straight.thigh_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(straight.shin_deg == doctest::Approx(0.0).epsilon(1e-6));

  const double l = 0.09;
  const auto bent = leg_ik(0.0, std::sqrt(2.0) * l, l, l);
  CHECK(bent.shin_deg == doctest::Approx(90.0));
  CHECK(bent.thigh_deg == doctest::Approx(-45.0));
}

TEST_CASE("leg_ik: out of workspace") {
  CHECK_THROWS_AS(leg_ik(0.0, 0.2, 0.09, 0.09), OutOfWorkspace);
  CHECK_THROWS_AS(leg_ik(0.0, 0.01, 0.1, 0.05), OutOfWorkspace);
}

TEST_CASE("leg_ik: forward kinematics round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.05, 0.12), frac(0.0, 1.0), ang(-kPi / 2, kPi / 2);
  for (int i = 0; i < 20000; ++i) {
    const double l1 = len(rng), l2 = len(rng);
    const double rmin = std::abs(l1 - l2), rmax = l1 + l2;
    const double r = rmin + (rmax - rmin) * (0.001 + 0.998 * frac(rng));
    const double a = ang(rng);
    const double fwd = r * std::sin(a), down = r * std::cos(a);
    const auto q = leg_ik(fwd, down, l1, l2);
    const auto p = leg_fk(q, l1, l2);
    CHECK(std::abs(p.forward - fwd) < 1e-9);
    CHECK(std::abs(p.down - down) < 1e-9);
    CHECK(q.shin_deg >= 0.0);  // knee-backward branch
  }
}

TEST_CASE("twist_to_joints: zero command is the neutral stance at every phase") {
  const GaitParams params;
  const auto ref = twist_to_joints({}, 0.0, params);
  for (double p : {0.1, 0.25, 0.5, 0.73, 0.99}) CHECK(twist_to_joints({}, p, params) == ref);
  CHECK(ref[joint_index(Leg::FrontLeft, Joint::Shoulder)] == 0.0);
}

TEST_CASE("twist_to_joints: diagonal pairs swap roles half a cycle apart") {
  const GaitParams params;
  const Twist2 cmd{0.1, 0.0, 0.0};
  for (double p : {0.0, 0.1, 0.3, 0.45}) {
    const auto a = twist_to_joints(cmd, p, params);
    const auto b = twist_to_joints(cmd, p + 0.5, params);
    for (std::size_t j = 0; j < 3; ++j) {
      // FL/RR at phase p behave like FR/RL at phase p + 0.5, and vice versa.
      CHECK(a[joint_index(Leg::FrontLeft, Joint(j))] == doctest::Approx(b[joint_index(Leg::FrontRight, Joint(j))]));
      CHECK(a[joint_index(Leg::RearRight, Joint(j))] == doctest::Approx(b[joint_index(Leg::RearLeft, Joint(j))]));
      CHECK(a[joint_index(Leg::FrontRight, Joint(j))] == doctest::Approx(b[joint_index(Leg::FrontLeft, Joint(j))]));
    }
  }
  // At phase 0 the first pair is at touchdown while the second is mid-cycle.
  CHECK(leg_phase(Leg::FrontLeft, 0.0) == 0.0);
  CHECK(leg_phase(Leg::FrontRight, 0.0) == 0.5);
}

TEST_CASE("twist_to_joints: periodic and continuous in phase") {
  const GaitParams params;
  const double dphase = 0.02 / params.cycle_period;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> v(-0.3, 0.3), w(-1.0, 1.0), ph(0.0, 1.0);
  double max_jump = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const Twist2 cmd{v(rng), v(rng), w(rng)};
    const double p0 = ph(rng);
    const auto a = twist_to_joints(cmd, p0, params), b = twist_to_joints(cmd, p0 + 1.0, params);
    for (std::size_t j = 0; j < kJointCount; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-9);
    auto prev = twist_to_joints(cmd, 0.0, params);
    for (int k = 1; k <= static_cast<int>(std::ceil(1.0 / dphase)); ++k) {
      const auto cur = twist_to_joints(cmd, k * dphase, params);
      for (std::size_t j = 0; j < kJointCount; ++j) max_jump = std::max(max_jump, std::abs(cur[j] - prev[j]));
      prev = cur;
    }
  }
  // Extreme corner command too.
  for (const Twist2 cmd : {Twist2{0.3, 0.3, 1.0}, Twist2{-0.3, 0.3, -1.0}, Twist2{0.3, -0.3, 1.0}}) {
    auto prev = twist_to_joints(cmd, 0.0, params);
    for (int k = 1; k <= static_cast<int>(std::ceil(1.0 / dphase)); ++k) {
      const auto cur = twist_to_joints(cmd, k * dphase, params);
      for (std::size_t j = 0; j < kJointCount; ++j) max_jump = std::max(max_jump, std::abs(cur[j] - prev[j]));
      prev = cur;
    }
  }
  CHECK(max_jump < 5.0);
}

TEST_CASE("apply_calibration") {
  CalibrationTable cal;
  cal.zero_pose.fill(90.0);
  JointAngles raw{};
  auto out = apply_calibration(raw, cal);
  for (std::size_t i = 0; i < kJointCount; ++i) CHECK(out[i] == 90);
  raw[0] = 100.0;
  out = apply_calibration(raw, cal);
  CHECK(out[0] == 180);
  raw[1] = -120.0;
  CHECK(apply_calibration(raw, cal)[1] == 0);
}

TEST_CASE("apply_calibration with the fixture file") {
  const auto cal = load_calibration(QUADSLAM_DATA_DIR "/calibration/default.cal");
  JointAngles raw{};
  for (std::size_t i = 0; i < kJointCount; ++i) raw[i] = 10.0 * static_cast<double>(i % 3);
  const auto out = apply_calibration(raw, cal);
  // zero + offset + raw, computed by hand from default.cal.
  const std::array<int, kJointCount> expect = {87, 104, 52, 91, 95, 50, 92, 103, 48, 90, 99, 56};
  for (std::size_t i = 0; i < kJointCount; ++i) CHECK(static_cast<int>(out[i]) == expect[i]);
}

TEST_CASE("calibration parsing errors") {
  CHECK_THROWS(parse_calibration("fl_shoulder 90 0\n"));
  CHECK_THROWS(parse_calibration("bogus 90 0\n"));
  CalibrationTable bad = CalibrationTable::neutral();
  bad.offsets[0] = 100.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("every servo angle stays in range for random twists and calibrations") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> v(-0.3, 0.3), w(-1.0, 1.0), ph(0.0, 1.0), z(0.0, 180.0),
      off(-20.0, 20.0);
  const GaitParams params;
  for (int i = 0; i < 20000; ++i) {
    CalibrationTable cal;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      cal.zero_pose[j] = z(rng);
      cal.offsets[j] = off(rng);
    }
    const auto cmd = apply_calibration(twist_to_joints({v(rng), v(rng), w(rng)}, ph(rng), params), cal);
    for (std::size_t j = 0; j < kJointCount; ++j) CHECK(cmd[j] <= 180);
  }
}

TEST_CASE("LL frame encoding") {
  const ServoCommand zeros;
  const auto f = ll_encode(zeros);
  CHECK(f[0] == 0xA5);
  for (std::size_t i = 1; i < kFrameSize; ++i) CHECK(f[i] == 0x00);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> deg(0, 180);
  for (int i = 0; i < 1000; ++i) {
    std::array<std::uint8_t, kJointCount> d{};
    for (auto& x : d) x = static_cast<std::uint8_t>(deg(rng));
    const ServoCommand c(d);
    CHECK(ll_decode(ll_encode(c)) == c);
  }
}

TEST_CASE("LL frame rejection") {
  std::array<std::uint8_t, kJointCount> d{};
  for (std::size_t i = 0; i < kJointCount; ++i) d[i] = static_cast<std::uint8_t>(10 * i);
  const auto good = ll_encode(ServoCommand(d));

  auto expect_error = [](std::span<const std::uint8_t> bytes, FrameError code) {
    try {
      (void)ll_decode(bytes);
      FAIL("decode accepted a corrupt frame");
    } catch (const FrameDecodeError& e) {
      CHECK(e.code() == code);
    }
  };

  auto flipped = good;
  flipped[5] ^= 0x04;
  expect_error(flipped, FrameError::BadChecksum);

  auto bad_sync = good;
  bad_sync[0] = 0x5A;
  expect_error(bad_sync, FrameError::BadSync);

  expect_error(std::span<const std::uint8_t>(good.data(), 13), FrameError::WrongLength);

  auto over = good;
  over[1] = 200;
  over[13] = static_cast<std::uint8_t>(over[13] + 200);
  expect_error(over, FrameError::AngleOutOfRange);
}

TEST_CASE("low-level controller consumes frames from the channel") {
  LlChannel channel(8);
  LowLevelController ll(channel);
  std::array<std::uint8_t, kJointCount> d{};
  d.fill(42);
  const ServoCommand cmd(d);
  channel.send(ll_encode(cmd));
  auto corrupt = ll_encode(cmd);
  corrupt[3] ^= 1;
  channel.send(corrupt);
  ll.stop();
  CHECK(ll.accepted() == 1);
  CHECK(ll.rejected() == 1);
  REQUIRE(ll.current().has_value());
  CHECK(*ll.current() == cmd);
}
