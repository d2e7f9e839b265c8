#pragma once

// Headless end-to-end run: an operator script is turned into skin readings,
// framed over a fragmenting loopback link, recognised and executed by the
// session against the robot simulator.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eskin/duplex/robot.hpp"
#include "eskin/duplex/session.hpp"

namespace eskin::duplex {

struct SetTargetStep {
  double grams = 1.0;
};
struct PressStep {
  std::size_t region = 0;
  double duration_ms = 250.0;
};
struct LongPressStep {
  std::size_t region = 0;
  double duration_ms = 1000.0;
};
struct SlideStep {
  std::size_t from = 0;
  std::size_t to = 1;
  double duration_ms = 300.0;
};
struct CollisionStep {
  std::uint8_t magnitude = 120;
};
struct WaitStep {
  double ms = 500.0;
};
// Waits until every given condition holds, as seen by the operator.
struct AwaitStep {
  std::optional<int> stage;
  std::optional<double> mass_at_least_g;
  std::optional<double> settled_ms;  // scale unchanged for this long
  double timeout_ms = 30000.0;
};
struct DisconnectStep {};

using ScriptStep = std::variant<SetTargetStep, PressStep, LongPressStep, SlideStep, CollisionStep,
                                WaitStep, AwaitStep, DisconnectStep>;

struct Script {
  std::vector<ScriptStep> steps;
  double gap_ms = 300.0;  // idle time after each touch
};

// {"gap_ms": 300, "steps": [{"op": "press", "region": 1, "repeat": 2}, ...]}
// ops: target(grams) press(region, duration_ms) longpress(region, duration_ms)
// slide(from, to, duration_ms) collision(magnitude) wait(ms)
// await(stage, mass_at_least_g, settled_ms, timeout_ms) disconnect.
// Unknown keys are rejected with std::invalid_argument.
Script parse_script(const std::string& json_text);
std::string script_to_json(const Script& script);

// Target 1 g, approach and grasp the spoon (bumping the table once on the way
// down and once more by injection), carry it over the scale, vibrate, tilt
// into flow and wait for the automatic stop before confirming.
Script happy_path_script(double target_g = 1.0);

struct RunConfig {
  std::uint64_t seed = 0;
  double press_depth_mm = 2.2;
  double press_radius_mm = 5.0;
  double ramp_ms = 30.0;  // touch onset and release
  double noise_sigma_uT = 0.1;
  std::size_t max_chunk = 16;  // link fragmentation
  double max_sim_ms = 300000.0;
  SessionConfig session{};
  RobotConfig robot{};
};

struct LogEntry {
  double t_ms = 0.0;
  std::string what;
  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct RunResult {
  bool completed = false;  // every step ran; false on an await timeout
  std::optional<std::size_t> failed_step;
  double sim_ms = 0.0;
  Stage final_stage = Stage::set_target;
  std::optional<double> target_g;
  double final_mass_g = 0.0;
  double spilled_g = 0.0;
  bool auto_stopped = false;
  bool safe_stopped = false;
  bool robot_halted = false;
  std::size_t collisions_in_active_stage = 0;
  std::size_t cues_received = 0;  // VibrationCmd frames at the operator
  std::size_t nacks = 0;
  std::size_t decode_errors = 0;
  std::size_t frames_sent = 0;
  bool replay_matches = false;  // Session::replay(log) reproduces the final state
  std::vector<std::string> gestures;
  std::vector<LogEntry> log;

  bool within_tolerance(double tol_g) const {
    return target_g && final_stage == Stage::confirm &&
           final_mass_g >= *target_g - tol_g && final_mass_g <= *target_g + tol_g;
  }
};

RunResult run_script(const Script& script, const RunConfig& cfg = {});

std::string to_string(const LogEntry& e);

}  // namespace eskin::duplex
