#pragma once

// Six-stage teleoperated weighing session. The transition function is pure;
// Session wraps it with the frame-to-gesture front end and an event log.

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "eskin/duplex/gesture.hpp"
#include "eskin/duplex/message.hpp"

namespace eskin::duplex {

enum class Stage : std::uint8_t { set_target = 1, approach, grasp, position, dispense, confirm };

const char* to_string(Stage s);

// k -> k+1, dispense -> position, and any unfinished stage -> confirm.
bool transition_allowed(Stage from, Stage to);

// Stage-dependent gesture table; nullopt when the gesture means nothing here.
//   set_target: Slide -> MOVE_*, LongPress -> CONFIRM
//   approach:   Slide -> MOVE_*, PressAt(1) -> MOVE_ZN, PressAt(6) -> MOVE_ZP,
//               PressAt(7) -> GRASP, LongPress -> CONFIRM
//   grasp:      PressAt(6) -> MOVE_ZP, LongPress -> CONFIRM
//   position:   Slide -> MOVE_*, PressAt(1)/(6) -> MOVE_ZN/ZP, PressAt(2)/(3) ->
//               TILT_UP/DOWN, PressAt(0) -> VIB_START, LongPress -> CONFIRM
//   dispense:   PressAt(0) -> VIB_START, LongPress -> VIB_STOP, PressAt(2)/(3) ->
//               TILT_UP/DOWN, Slide -> MOVE_*, PressAt(5) -> CONFIRM
//   confirm:    nothing
std::optional<ControlCode> gesture_to_command(const Gesture& g, Stage stage);

enum class Endpoint : std::uint8_t { operator_side, robot };

struct SessionConfig {
  double tolerance_g = 0.05;
  std::uint16_t collision_cue_ms = 200;
  double frame_period_ms = 20.0;  // SensorFrame seq -> time
  GestureConfig gesture{};
};

struct SessionState {
  Stage stage = Stage::set_target;
  std::optional<double> target_g;
  double mass_g = 0.0;
  bool vibrating = false;
  int tilt_steps = 0;  // net TILT_UP minus TILT_DOWN sent to the robot
  bool auto_stopped = false;
  bool safe_stopped = false;
  std::optional<std::uint32_t> last_seq;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

struct Inbound {
  Endpoint from = Endpoint::operator_side;
  Message msg;
};
struct GestureEvent {
  Gesture gesture;
};
struct Disconnected {};

using Event = std::variant<Inbound, GestureEvent, Disconnected>;

struct Outbound {
  Endpoint to = Endpoint::operator_side;
  Message msg;
};

// Rejected events leave the state unchanged and answer the operator with a
// Nack. SensorFrames only advance last_seq here; gestures arrive already
// classified as GestureEvent.
std::pair<SessionState, std::vector<Outbound>> session_step(const SessionState& s, const Event& e,
                                                            const SessionConfig& cfg = {});

class Session {
 public:
  explicit Session(SessionConfig cfg = {});

  std::vector<Outbound> handle(const Event& e);

  const SessionState& state() const { return state_; }
  const std::vector<Event>& log() const { return log_; }
  const SessionConfig& config() const { return cfg_; }

  // Folds session_step over a recorded log.
  static SessionState replay(const std::vector<Event>& log, const SessionConfig& cfg = {});

 private:
  std::vector<Outbound> apply(const Event& e);

  SessionConfig cfg_;
  SessionState state_;
  GestureRecognizer recognizer_;
  std::vector<Event> log_;
};

}  // namespace eskin::duplex
