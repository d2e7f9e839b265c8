#pragma once

// Robot side of the link: a gripper on a coarse grid carrying a spoon of
// powder over a scale. Control commands move it; each tick integrates the
// spoon and reports the scale.

#include <cstdint>
#include <random>
#include <vector>

#include "eskin/actuation.hpp"
#include "eskin/duplex/message.hpp"
#include "eskin/weighing.hpp"

namespace eskin::duplex {

struct GridPos {
  int x = 0;
  int y = 0;
  int z = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

struct RobotConfig {
  GridPos start{0, 0, 2};
  GridPos spoon{1, 0, 0};
  int scale_x = 2;  // the scale pan covers (scale_x, 0) at any height
  int extent = 5;   // |x|, |y| and z stay within this
  double tilt_step_deg = 5.0;
  double spoon_load_g = 3.0;
  weighing::Material material = weighing::flour();
  double vib_duty = 1.0;
  std::uint8_t collision_magnitude = 200;
  double dt_s = 0.05;
  std::uint64_t seed = 0;
};

class RobotSim {
 public:
  explicit RobotSim(RobotConfig cfg = {});

  // Messages produced immediately (collisions).
  std::vector<Message> apply(ControlCode code);
  // Advances one step; returns queued collisions followed by a ScaleReading.
  std::vector<Message> tick();
  void inject_collision(std::uint8_t magnitude);
  // Safe stop: motors off, further commands ignored.
  void halt();

  double time_s() const { return t_s_; }
  const GridPos& position() const { return pos_; }
  bool holding() const { return holding_; }
  bool vibrating() const { return vibrating_; }
  bool halted() const { return halted_; }
  double tilt_deg() const { return spoon_.tilt_deg; }
  double scale_g() const { return static_cast<double>(scale_ug_) * 1e-6; }
  double spilled_g() const { return static_cast<double>(spilled_ug_) * 1e-6; }
  double spoon_g() const { return spoon_.load_g(); }
  std::size_t collisions() const { return collisions_; }

 private:
  void set_vibration(bool on);

  RobotConfig cfg_;
  GridPos pos_;
  bool holding_ = false;
  bool vibrating_ = false;
  bool halted_ = false;
  double t_s_ = 0.0;
  weighing::SpoonState spoon_;
  std::int64_t scale_ug_ = 0;
  std::int64_t spilled_ug_ = 0;
  actuation::VibrationProgram program_;
  std::vector<Message> pending_;
  std::size_t collisions_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace eskin::duplex
