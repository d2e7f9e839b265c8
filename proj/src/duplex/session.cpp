#include "eskin/duplex/session.hpp"

#include <algorithm>
#include <cmath>

namespace eskin::duplex {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::set_target: return "set_target";
    case Stage::approach: return "approach";
    case Stage::grasp: return "grasp";
    case Stage::position: return "position";
    case Stage::dispense: return "dispense";
    case Stage::confirm: return "confirm";
  }
  return "?";
}

bool transition_allowed(Stage from, Stage to) {
  auto f = static_cast<int>(from);
  auto t = static_cast<int>(to);
  if (t == f + 1 && f < 6) return true;
  if (from == Stage::dispense && to == Stage::position) return true;
  return to == Stage::confirm && f < 6;
}

namespace {

ControlCode move_for(Direction d) {
  switch (d) {
    case Direction::xp: return ControlCode::move_xp;
    case Direction::xn: return ControlCode::move_xn;
    case Direction::yp: return ControlCode::move_yp;
    case Direction::yn: return ControlCode::move_yn;
  }
  return ControlCode::move_xp;
}

bool is_planar_move(ControlCode c) {
  return c == ControlCode::move_xp || c == ControlCode::move_xn || c == ControlCode::move_yp ||
         c == ControlCode::move_yn;
}

bool is_z_move(ControlCode c) { return c == ControlCode::move_zp || c == ControlCode::move_zn; }
bool is_tilt(ControlCode c) { return c == ControlCode::tilt_up || c == ControlCode::tilt_down; }

std::optional<ControlCode> press_command(std::size_t region, Stage stage) {
  switch (stage) {
    case Stage::approach:
      if (region == 1) return ControlCode::move_zn;
      if (region == 6) return ControlCode::move_zp;
      if (region == 7) return ControlCode::grasp;
      return std::nullopt;
    case Stage::grasp:
      if (region == 6) return ControlCode::move_zp;
      return std::nullopt;
    case Stage::position:
    case Stage::dispense:
      if (region == 0) return ControlCode::vib_start;
      if (region == 2) return ControlCode::tilt_up;
      if (region == 3) return ControlCode::tilt_down;
      if (stage == Stage::position) {
        if (region == 1) return ControlCode::move_zn;
        if (region == 6) return ControlCode::move_zp;
      } else if (region == 5) {
        return ControlCode::confirm;
      }
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

// Commands the operator may issue per stage, gesture-derived or direct.
bool command_allowed(ControlCode c, Stage stage) {
  switch (stage) {
    case Stage::set_target: return is_planar_move(c) || c == ControlCode::confirm;
    case Stage::approach:
      return is_planar_move(c) || is_z_move(c) || c == ControlCode::grasp || c == ControlCode::confirm;
    case Stage::grasp: return c == ControlCode::move_zp || c == ControlCode::confirm;
    case Stage::position:
      return is_planar_move(c) || is_z_move(c) || is_tilt(c) || c == ControlCode::vib_start ||
             c == ControlCode::confirm;
    case Stage::dispense:
      return is_planar_move(c) || is_tilt(c) || c == ControlCode::vib_start ||
             c == ControlCode::vib_stop || c == ControlCode::confirm;
    case Stage::confirm: return false;
  }
  return false;
}

struct Step {
  SessionState s;
  std::vector<Outbound> out;

  void to_operator(Message m) { out.push_back({Endpoint::operator_side, std::move(m)}); }
  void to_robot(ControlCode c) { out.push_back({Endpoint::robot, ControlCmd{c}}); }
  void nack(NackReason r) { to_operator(Nack{r}); }

  void stop_vibration() {
    if (!s.vibrating) return;
    to_robot(ControlCode::vib_stop);
    s.vibrating = false;
  }

  void enter(Stage to) {
    if (s.stage == Stage::dispense) stop_vibration();
    s.stage = to;
    to_operator(StageTransition{static_cast<std::uint8_t>(to)});
  }

  // Guarded request; returns false (and nacks) when refused.
  bool request(Stage to) {
    if (!transition_allowed(s.stage, to)) {
      nack(NackReason::illegal_transition);
      return false;
    }
    if (s.stage == Stage::set_target && to == Stage::approach && !s.target_g) {
      nack(NackReason::target_missing);
      return false;
    }
    enter(to);
    return true;
  }

  void command(ControlCode c) {
    if (!command_allowed(c, s.stage)) {
      nack(NackReason::illegal_transition);
      return;
    }
    if (c == ControlCode::confirm) {
      request(Stage::confirm);
      return;
    }
    switch (s.stage) {
      case Stage::set_target:
        // The first planar move starts the approach.
        if (!request(Stage::approach)) return;
        break;
      case Stage::approach:
        if (c == ControlCode::grasp) {
          to_robot(c);
          enter(Stage::grasp);
          return;
        }
        break;
      case Stage::grasp:
        to_robot(c);
        enter(Stage::position);
        return;
      case Stage::position:
        if (c == ControlCode::vib_start) {
          to_robot(c);
          s.vibrating = true;
          s.auto_stopped = false;
          enter(Stage::dispense);
          return;
        }
        break;
      case Stage::dispense:
        if (is_planar_move(c)) {
          enter(Stage::position);  // stops the motors first
          break;
        }
        if (c == ControlCode::vib_start) {
          s.vibrating = true;
          s.auto_stopped = false;
        } else if (c == ControlCode::vib_stop) {
          if (!s.vibrating) return;
          s.vibrating = false;
        }
        break;
      case Stage::confirm:
        return;
    }
    if (c == ControlCode::tilt_up) ++s.tilt_steps;
    if (c == ControlCode::tilt_down) --s.tilt_steps;
    to_robot(c);
  }

  void from_operator(const Message& m) {
    if (const auto* f = std::get_if<SensorFrame>(&m)) {
      if (s.last_seq && f->seq <= *s.last_seq) {
        nack(NackReason::stale_sequence);
        return;
      }
      s.last_seq = f->seq;
      return;
    }
    if (std::holds_alternative<Hello>(m)) {
      to_operator(Hello{});
      return;
    }
    if (const auto* t = std::get_if<TargetWeight>(&m)) {
      if (s.stage != Stage::set_target || t->centigrams == 0) {
        nack(NackReason::target_not_accepted);
        return;
      }
      s.target_g = t->centigrams / 100.0;
      to_operator(Ack{t->centigrams});
      return;
    }
    if (const auto* st = std::get_if<StageTransition>(&m)) {
      request(static_cast<Stage>(st->stage));
      return;
    }
    if (const auto* c = std::get_if<ControlCmd>(&m)) {
      command(c->code);
      return;
    }
    // Heartbeats and robot-only messages from the operator carry no action.
  }

  void from_robot(const Message& m, const SessionConfig& cfg) {
    if (const auto* c = std::get_if<CollisionEvent>(&m)) {
      if (s.stage < Stage::approach || s.stage > Stage::dispense) return;
      VibrationCmd cue;
      cue.duty.fill(c->magnitude);
      cue.duration_ms = cfg.collision_cue_ms;
      to_operator(cue);
      return;
    }
    if (const auto* r = std::get_if<ScaleReading>(&m)) {
      s.mass_g = r->milligrams / 1000.0;
      to_operator(*r);
      if (s.stage == Stage::dispense && s.vibrating && s.target_g &&
          s.mass_g >= *s.target_g - cfg.tolerance_g) {
        stop_vibration();
        for (; s.tilt_steps > 0; --s.tilt_steps) to_robot(ControlCode::tilt_down);
        s.auto_stopped = true;
      }
    }
  }
};

}  // namespace

std::optional<ControlCode> gesture_to_command(const Gesture& g, Stage stage) {
  if (stage == Stage::confirm) return std::nullopt;
  if (const auto* sl = std::get_if<SlideGesture>(&g)) {
    if (stage == Stage::grasp) return std::nullopt;
    return move_for(sl->direction);
  }
  if (std::holds_alternative<LongPress>(g))
    return stage == Stage::dispense ? ControlCode::vib_stop : ControlCode::confirm;
  if (const auto* p = std::get_if<PressAt>(&g)) return press_command(p->region, stage);
  return std::nullopt;
}

std::pair<SessionState, std::vector<Outbound>> session_step(const SessionState& s, const Event& e,
                                                            const SessionConfig& cfg) {
  Step st{s, {}};
  if (std::holds_alternative<Disconnected>(e)) {
    if (!st.s.safe_stopped) {
      st.s.safe_stopped = true;
      st.s.vibrating = false;
      st.to_robot(ControlCode::vib_stop);
    }
    return {st.s, std::move(st.out)};
  }
  if (st.s.safe_stopped) {
    if (const auto* in = std::get_if<Inbound>(&e); in && in->from == Endpoint::operator_side)
      st.nack(NackReason::session_stopped);
    return {st.s, std::move(st.out)};
  }
  if (const auto* in = std::get_if<Inbound>(&e)) {
    if (in->from == Endpoint::operator_side)
      st.from_operator(in->msg);
    else
      st.from_robot(in->msg, cfg);
  } else if (const auto* ge = std::get_if<GestureEvent>(&e)) {
    if (auto c = gesture_to_command(ge->gesture, st.s.stage)) st.command(*c);
  }
  return {st.s, std::move(st.out)};
}

Session::Session(SessionConfig cfg) : cfg_(cfg), recognizer_(cfg.gesture) {}

std::vector<Outbound> Session::apply(const Event& e) {
  log_.push_back(e);
  auto [next, out] = session_step(state_, e, cfg_);
  state_ = std::move(next);
  return std::move(out);
}

std::vector<Outbound> Session::handle(const Event& e) {
  auto out = apply(e);
  const auto* in = std::get_if<Inbound>(&e);
  if (!in || in->from != Endpoint::operator_side || state_.safe_stopped) return out;
  const auto* f = std::get_if<SensorFrame>(&in->msg);
  // Only frames that advanced the sequence reach the recogniser.
  if (!f || state_.last_seq != f->seq || !out.empty()) return out;
  std::array<double, 24> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = from_centi_uT(f->centi_uT[i]);
  if (auto g = recognizer_.push(f->seq * cfg_.frame_period_ms, v);
      g && !std::holds_alternative<NoGesture>(*g)) {
    auto more = apply(GestureEvent{*g});
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

SessionState Session::replay(const std::vector<Event>& log, const SessionConfig& cfg) {
  SessionState s;
  for (const auto& e : log) s = session_step(s, e, cfg).first;
  return s;
}

}  // namespace eskin::duplex
