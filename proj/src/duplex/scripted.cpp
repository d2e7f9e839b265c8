#include "eskin/duplex/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

#include "eskin/duplex/transport.hpp"
#include "eskin/sensing.hpp"
#include "eskin/skin_model.hpp"

namespace eskin::duplex {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  ok.insert("op");
  ok.insert("repeat");
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw std::invalid_argument("unknown key '" + k + "' in script step");
}

std::size_t region_of(const json& j, const char* key) {
  auto r = j.at(key).get<std::size_t>();
  if (r >= skin::kSensors) throw std::invalid_argument("region out of range");
  return r;
}

ScriptStep parse_step(const json& j) {
  auto op = j.at("op").get<std::string>();
  if (op == "target") {
    check_keys(j, {"grams"});
    return SetTargetStep{j.at("grams").get<double>()};
  }
  if (op == "press") {
    check_keys(j, {"region", "duration_ms"});
    return PressStep{region_of(j, "region"), j.value("duration_ms", PressStep{}.duration_ms)};
  }
  if (op == "longpress") {
    check_keys(j, {"region", "duration_ms"});
    return LongPressStep{region_of(j, "region"), j.value("duration_ms", LongPressStep{}.duration_ms)};
  }
  if (op == "slide") {
    check_keys(j, {"from", "to", "duration_ms"});
    return SlideStep{region_of(j, "from"), region_of(j, "to"),
                     j.value("duration_ms", SlideStep{}.duration_ms)};
  }
  if (op == "collision") {
    check_keys(j, {"magnitude"});
    return CollisionStep{j.value<std::uint8_t>("magnitude", 120)};
  }
  if (op == "wait") {
    check_keys(j, {"ms"});
    return WaitStep{j.at("ms").get<double>()};
  }
  if (op == "await") {
    check_keys(j, {"stage", "mass_at_least_g", "settled_ms", "timeout_ms"});
    AwaitStep a;
    if (j.contains("stage")) a.stage = j["stage"].get<int>();
    if (j.contains("mass_at_least_g")) a.mass_at_least_g = j["mass_at_least_g"].get<double>();
    if (j.contains("settled_ms")) a.settled_ms = j["settled_ms"].get<double>();
    a.timeout_ms = j.value("timeout_ms", a.timeout_ms);
    return a;
  }
  if (op == "disconnect") {
    check_keys(j, {});
    return DisconnectStep{};
  }
  throw std::invalid_argument("unknown script op '" + op + "'");
}

json step_json(const ScriptStep& s) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SetTargetStep>) return {{"op", "target"}, {"grams", v.grams}};
        if constexpr (std::is_same_v<T, PressStep>)
          return {{"op", "press"}, {"region", v.region}, {"duration_ms", v.duration_ms}};
        if constexpr (std::is_same_v<T, LongPressStep>)
          return {{"op", "longpress"}, {"region", v.region}, {"duration_ms", v.duration_ms}};
        if constexpr (std::is_same_v<T, SlideStep>)
          return {{"op", "slide"}, {"from", v.from}, {"to", v.to}, {"duration_ms", v.duration_ms}};
        if constexpr (std::is_same_v<T, CollisionStep>) return {{"op", "collision"}, {"magnitude", v.magnitude}};
        if constexpr (std::is_same_v<T, WaitStep>) return {{"op", "wait"}, {"ms", v.ms}};
        if constexpr (std::is_same_v<T, AwaitStep>) {
          json j = {{"op", "await"}, {"timeout_ms", v.timeout_ms}};
          if (v.stage) j["stage"] = *v.stage;
          if (v.mass_at_least_g) j["mass_at_least_g"] = *v.mass_at_least_g;
          if (v.settled_ms) j["settled_ms"] = *v.settled_ms;
          return j;
        }
        if constexpr (std::is_same_v<T, DisconnectStep>) return {{"op", "disconnect"}};
      },
      s);
}

// Operator hand on the skin: zeroed readings for a contact at time t.
class OperatorSkin {
 public:
  explicit OperatorSkin(const RunConfig& cfg)
      : cfg_(cfg),
        geom_(skin::SkinGeometry::standard()),
        film_(skin::MagneticFilm::uniform(geom_)),
        base_(skin::sensor_field(film_, geom_).flatten()),
        noise_{cfg.noise_sigma_uT, 0.01, sensing::mix_seed(cfg.seed, 2)} {}

  struct Touch {
    double start_ms;
    double duration_ms;
    std::size_t from;
    std::size_t to;
  };

  std::array<double, skin::kChannels> read(const std::optional<Touch>& touch, double t_ms,
                                           std::uint64_t index) const {
    sensing::SensorSample s;
    if (touch && t_ms >= touch->start_ms && t_ms < touch->start_ms + touch->duration_ms) {
      double u = t_ms - touch->start_ms;
      double env = std::min({1.0, u / cfg_.ramp_ms, (touch->duration_ms - u) / cfg_.ramp_ms});
      double f = u / touch->duration_ms;
      const auto& a = geom_.sensors[touch->from];
      const auto& b = geom_.sensors[touch->to];
      skin::Point2 c{a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
      skin::Deformation d = skin::Press{c, cfg_.press_depth_mm * env, cfg_.press_radius_mm};
      auto r = skin::sensor_field(skin::deform(film_, d), geom_).flatten();
      for (std::size_t i = 0; i < r.size(); ++i) s.values[i] = r[i] - base_[i];
    }
    return sensing::apply_noise(s, noise_, index).values;
  }

 private:
  const RunConfig& cfg_;
  skin::SkinGeometry geom_;
  skin::MagneticFilm film_;
  std::array<double, skin::kChannels> base_;
  sensing::NoiseModel noise_;
};

}  // namespace

Script parse_script(const std::string& json_text) {
  json j = json::parse(json_text);
  for (const auto& [k, v] : j.items())
    if (k != "steps" && k != "gap_ms") throw std::invalid_argument("unknown key '" + k + "' in script");
  Script s;
  s.gap_ms = j.value("gap_ms", s.gap_ms);
  for (const auto& sj : j.at("steps")) {
    auto step = parse_step(sj);
    auto repeat = sj.value("repeat", 1);
    if (repeat < 1) throw std::invalid_argument("repeat must be >= 1");
    for (int i = 0; i < repeat; ++i) s.steps.push_back(step);
  }
  return s;
}

std::string script_to_json(const Script& script) {
  json steps = json::array();
  for (const auto& s : script.steps) steps.push_back(step_json(s));
  return json{{"gap_ms", script.gap_ms}, {"steps", steps}}.dump(2);
}

Script happy_path_script(double target_g) {
  Script s;
  auto& st = s.steps;
  st.push_back(SetTargetStep{target_g});
  st.push_back(SlideStep{0, 1});  // +x, starts the approach
  st.push_back(PressStep{1});     // down
  st.push_back(PressStep{1});     // down to the table
  st.push_back(CollisionStep{});
  st.push_back(WaitStep{300});
  st.push_back(PressStep{1});  // bumps the table
  st.push_back(PressStep{7});  // grasp
  st.push_back(PressStep{6});  // lift
  st.push_back(SlideStep{0, 1});  // over the scale
  st.push_back(PressStep{0});     // motors on
  for (int i = 0; i < 10; ++i) st.push_back(PressStep{2});  // tilt to 50 deg
  AwaitStep flow;
  flow.mass_at_least_g = 0.9 * target_g;
  flow.timeout_ms = 60000;
  st.push_back(flow);
  AwaitStep settle;
  settle.settled_ms = 1500;
  st.push_back(settle);
  st.push_back(PressStep{5});  // confirm
  AwaitStep done;
  done.stage = static_cast<int>(Stage::confirm);
  done.timeout_ms = 2000;
  st.push_back(done);
  return s;
}

std::string to_string(const LogEntry& e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%9.0f ", e.t_ms);
  return buf + e.what;
}

RunResult run_script(const Script& script, const RunConfig& cfg) {
  constexpr double kTickMs = 10.0;
  const double frame_ms = cfg.session.frame_period_ms;
  const double robot_ms = cfg.robot.dt_s * 1000.0;

  RunResult res;
  OperatorSkin hand(cfg);
  auto [op_link, robot_link] = make_loopback_pair(sensing::mix_seed(cfg.seed, 1), cfg.max_chunk);
  RobotConfig rcfg = cfg.robot;
  rcfg.seed = sensing::mix_seed(cfg.seed, 3);
  RobotSim robot(rcfg);
  Session session(cfg.session);
  FrameAssembler at_robot;
  FrameAssembler at_operator;

  double t = 0.0;
  auto log = [&](std::string what) { res.log.push_back({t, std::move(what)}); };

  std::vector<std::uint8_t> buf;
  auto send_op = [&](const Message& m) {
    if (!std::holds_alternative<SensorFrame>(m)) log("op -> " + describe(m));
    op_link->send(encode(m));
  };

  // Robot-side dispatch; collisions raised by commands feed straight back.
  std::vector<Event> pending;
  auto deliver = [&](const Event& first) {
    pending.push_back(first);
    while (!pending.empty()) {
      Event e = std::move(pending.front());
      pending.erase(pending.begin());
      if (const auto* in = std::get_if<Inbound>(&e); in && in->from == Endpoint::robot &&
                                                     std::holds_alternative<CollisionEvent>(in->msg)) {
        auto stage = session.state().stage;
        if (!session.state().safe_stopped && stage >= Stage::approach && stage <= Stage::dispense)
          ++res.collisions_in_active_stage;
        log("robot -> " + describe(in->msg));
      }
      std::size_t before = session.log().size();
      Stage stage_before = session.state().stage;
      auto out = session.handle(e);
      for (std::size_t i = before; i < session.log().size(); ++i)
        if (const auto* g = std::get_if<GestureEvent>(&session.log()[i])) {
          std::string s = describe(g->gesture) + " @" + to_string(stage_before);
          res.gestures.push_back(s);
          log("gesture " + s);
        }
      for (auto& o : out) {
        if (o.to == Endpoint::operator_side) {
          if (!std::holds_alternative<ScaleReading>(o.msg)) log("session -> op " + describe(o.msg));
          robot_link->send(encode(o.msg));
          continue;
        }
        const auto& cmd = std::get<ControlCmd>(o.msg);
        log("session -> robot " + describe(o.msg));
        for (auto& m : robot.apply(cmd.code)) pending.push_back(Inbound{Endpoint::robot, m});
      }
    }
  };

  // Operator view.
  int op_stage = 1;
  double op_mass = 0.0;
  double op_mass_since = 0.0;
  bool connected = true;
  std::uint32_t seq = 0;
  send_op(Hello{});

  std::optional<OperatorSkin::Touch> touch;
  std::size_t step = 0;
  double step_start = 0.0;
  bool step_begun = false;

  auto step_done = [&]() -> std::optional<bool> {  // nullopt = still running, false = failed
    const auto& s = script.steps[step];
    double el = t - step_start;
    if (!step_begun) {
      step_begun = true;
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SetTargetStep>)
              send_op(TargetWeight{static_cast<std::uint16_t>(std::lround(v.grams * 100.0))});
            if constexpr (std::is_same_v<T, PressStep>) touch = OperatorSkin::Touch{t, v.duration_ms, v.region, v.region};
            if constexpr (std::is_same_v<T, LongPressStep>)
              touch = OperatorSkin::Touch{t, v.duration_ms, v.region, v.region};
            if constexpr (std::is_same_v<T, SlideStep>) touch = OperatorSkin::Touch{t, v.duration_ms, v.from, v.to};
            if constexpr (std::is_same_v<T, CollisionStep>) {
              log("inject collision");
              robot.inject_collision(v.magnitude);
            }
            if constexpr (std::is_same_v<T, DisconnectStep>) {
              log("operator disconnects");
              connected = false;
              op_link->close();
              deliver(Disconnected{});
              robot.halt();
            }
          },
          s);
    }
    return std::visit(
        [&](const auto& v) -> std::optional<bool> {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, PressStep> || std::is_same_v<T, LongPressStep> ||
                        std::is_same_v<T, SlideStep>) {
            if (el < v.duration_ms + script.gap_ms) return std::nullopt;
            touch.reset();
            return true;
          } else if constexpr (std::is_same_v<T, WaitStep>) {
            if (el < v.ms) return std::nullopt;
            return true;
          } else if constexpr (std::is_same_v<T, AwaitStep>) {
            bool ok = (!v.stage || op_stage == *v.stage) &&
                      (!v.mass_at_least_g || op_mass >= *v.mass_at_least_g) &&
                      (!v.settled_ms || t - op_mass_since >= *v.settled_ms);
            if (ok) return true;
            if (el >= v.timeout_ms) return false;
            return std::nullopt;
          } else {
            return true;
          }
        },
        s);
  };

  for (; t <= cfg.max_sim_ms; t += kTickMs) {
    // Script.
    while (step < script.steps.size()) {
      if (!step_begun) step_start = t;
      auto r = step_done();
      if (!r) break;
      if (!*r) {
        res.failed_step = step;
        log("await timed out at step " + std::to_string(step));
        break;
      }
      ++step;
      step_begun = false;
    }
    if (res.failed_step || step == script.steps.size()) break;

    // Operator skin stream.
    if (connected && std::fmod(t, frame_ms) < 1e-9) {
      SensorFrame f;
      f.seq = ++seq;
      auto v = hand.read(touch, t, f.seq);
      for (std::size_t i = 0; i < v.size(); ++i) f.centi_uT[i] = to_centi_uT(v[i]);
      send_op(f);
      ++res.frames_sent;
    }

    // Robot side: inbound frames, then the physical tick.
    buf.clear();
    while (robot_link->receive(buf) > 0) {
    }
    at_robot.feed(buf);
    while (auto m = at_robot.next()) deliver(Inbound{Endpoint::operator_side, *m});
    if (std::fmod(t, robot_ms) < 1e-9 && t > 0.0)
      for (auto& m : robot.tick()) deliver(Inbound{Endpoint::robot, m});

    // Operator side.
    buf.clear();
    while (op_link->receive(buf) > 0) {
    }
    at_operator.feed(buf);
    while (auto m = at_operator.next()) {
      if (const auto* st = std::get_if<StageTransition>(&*m)) op_stage = st->stage;
      if (const auto* sr = std::get_if<ScaleReading>(&*m)) {
        double g = sr->milligrams / 1000.0;
        if (g != op_mass) {
          op_mass = g;
          op_mass_since = t;
        }
      }
      if (std::holds_alternative<VibrationCmd>(*m)) ++res.cues_received;
      if (std::holds_alternative<Nack>(*m)) ++res.nacks;
    }
  }

  res.completed = !res.failed_step && step == script.steps.size();
  res.sim_ms = t;
  res.final_stage = session.state().stage;
  res.target_g = session.state().target_g;
  res.final_mass_g = robot.scale_g();
  res.spilled_g = robot.spilled_g();
  res.auto_stopped = session.state().auto_stopped;
  res.safe_stopped = session.state().safe_stopped;
  res.robot_halted = robot.halted();
  res.decode_errors = at_robot.errors() + at_operator.errors();
  res.replay_matches = Session::replay(session.log(), cfg.session) == session.state();
  return res;
}

}  // namespace eskin::duplex
