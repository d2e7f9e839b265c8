#include "eskin/duplex/robot.hpp"

#include <algorithm>
#include <cmath>

#include "eskin/sensing.hpp"

namespace eskin::duplex {

namespace {
// A VIB_START runs until stopped; the program needs a finite duration.
constexpr double kOpenEndedMs = 3.6e6;
}  // namespace

RobotSim::RobotSim(RobotConfig cfg)
    : cfg_(std::move(cfg)), pos_(cfg_.start), rng_(sensing::mix_seed(cfg_.seed, 0xB0B)) {
  cfg_.material.validate();
}

void RobotSim::set_vibration(bool on) {
  double now_ms = t_s_ * 1000.0;
  if (on == vibrating_) return;
  vibrating_ = on;
  if (on) {
    for (std::size_t c = 0; c < actuation::kChannels; ++c)
      program_.commands.push_back({c, cfg_.vib_duty, now_ms, kOpenEndedMs});
    return;
  }
  for (auto& cmd : program_.commands)
    if (cmd.end_ms() > now_ms) cmd.duration_ms = std::max(0.0, now_ms - cmd.start_ms);
}

std::vector<Message> RobotSim::apply(ControlCode code) {
  std::vector<Message> out;
  if (halted_) return out;
  auto clamp = [&](int v) { return std::clamp(v, -cfg_.extent, cfg_.extent); };
  switch (code) {
    case ControlCode::move_xp: pos_.x = clamp(pos_.x + 1); break;
    case ControlCode::move_xn: pos_.x = clamp(pos_.x - 1); break;
    case ControlCode::move_yp: pos_.y = clamp(pos_.y + 1); break;
    case ControlCode::move_yn: pos_.y = clamp(pos_.y - 1); break;
    case ControlCode::move_zp: pos_.z = std::min(pos_.z + 1, cfg_.extent); break;
    case ControlCode::move_zn:
      if (pos_.z == 0) {
        // The table stops the gripper.
        ++collisions_;
        out.push_back(CollisionEvent{cfg_.collision_magnitude});
      } else {
        --pos_.z;
      }
      break;
    case ControlCode::grasp:
      if (!holding_ && pos_ == cfg_.spoon) {
        holding_ = true;
        spoon_ = {0.0, weighing::grams_to_ug(cfg_.spoon_load_g)};
      }
      break;
    case ControlCode::release: holding_ = false; break;
    case ControlCode::tilt_up:
      spoon_.tilt_deg = std::min(90.0, spoon_.tilt_deg + cfg_.tilt_step_deg);
      break;
    case ControlCode::tilt_down:
      spoon_.tilt_deg = std::max(0.0, spoon_.tilt_deg - cfg_.tilt_step_deg);
      break;
    case ControlCode::vib_start: set_vibration(true); break;
    case ControlCode::vib_stop: set_vibration(false); break;
    case ControlCode::confirm: break;
  }
  return out;
}

void RobotSim::inject_collision(std::uint8_t magnitude) {
  ++collisions_;
  pending_.push_back(CollisionEvent{magnitude});
}

void RobotSim::halt() {
  set_vibration(false);
  halted_ = true;
}

std::vector<Message> RobotSim::tick() {
  std::vector<Message> out = std::move(pending_);
  pending_.clear();
  t_s_ += cfg_.dt_s;
  if (holding_ && spoon_.load_ug > 0) {
    double vib = actuation::mean_amplitude(actuation::amplitude_at(program_, t_s_ * 1000.0));
    auto r = weighing::step(spoon_, cfg_.material, vib, cfg_.dt_s, rng_);
    spoon_ = r.state;
    bool over_pan = pos_.x == cfg_.scale_x && pos_.y == 0;
    (over_pan ? scale_ug_ : spilled_ug_) += r.released_ug;
  }
  out.push_back(ScaleReading{static_cast<std::uint32_t>((scale_ug_ + 500) / 1000)});
  return out;
}

}  // namespace eskin::duplex
