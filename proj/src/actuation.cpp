#include "eskin/actuation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace eskin::actuation {
namespace {

double response(const VibrationCommand& c, double t_ms) {
  if (t_ms < c.start_ms) return 0.0;
  const double end = c.end_ms();
  if (t_ms < end) return c.duty * (1.0 - std::exp(-(t_ms - c.start_ms) / kRiseTauMs));
  if (t_ms >= end + kSettleTaus * kRiseTauMs) return 0.0;
  const double peak = c.duty * (1.0 - std::exp(-c.duration_ms / kRiseTauMs));
  return peak * std::exp(-(t_ms - end) / kRiseTauMs);
}

}  // namespace

double VibrationProgram::support_end_ms() const {
  double end = 0.0;
  for (const auto& c : commands) end = std::max(end, c.end_ms() + kSettleTaus * kRiseTauMs);
  return end;
}

void validate(const VibrationProgram& program) {
  using K = ProgramError::Kind;
  for (const auto& c : program.commands) {
    if (c.channel >= kChannels) throw ProgramError(K::bad_channel, "channel outside 0-7");
    if (!(c.duty >= 0.0 && c.duty <= 1.0)) throw ProgramError(K::duty_range, "duty outside [0, 1]");
    if (!(c.duration_ms > 0.0) || !std::isfinite(c.start_ms) || !std::isfinite(c.duration_ms))
      throw ProgramError(K::bad_duration, "duration must be positive and finite");
  }
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    std::vector<const VibrationCommand*> on;
    for (const auto& c : program.commands)
      if (c.channel == ch) on.push_back(&c);
    std::sort(on.begin(), on.end(),
              [](const auto* a, const auto* b) { return a->start_ms < b->start_ms; });
    for (std::size_t i = 1; i < on.size(); ++i)
      if (on[i]->start_ms < on[i - 1]->end_ms())
        throw ProgramError(K::overlap, "overlapping commands on channel " + std::to_string(ch));
  }
}

Amplitudes amplitude_at(const VibrationProgram& program, double t_ms) {
  Amplitudes a{};
  for (const auto& c : program.commands) a[c.channel] += response(c, t_ms);
  for (auto& v : a) v = std::clamp(v, 0.0, 1.0);
  return a;
}

MotorState motor_state(const VibrationProgram& program, double t_ms) {
  MotorState s;
  s.amplitude = amplitude_at(program, t_ms);
  for (const auto& c : program.commands)
    if (t_ms >= c.start_ms && t_ms < c.end_ms()) s.volts[c.channel] = c.duty * kSupplyVolts;
  return s;
}

double mean_amplitude(const Amplitudes& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s / static_cast<double>(kChannels);
}

std::array<std::size_t, kChannels> ring_order() {
  // Closed loop over the standard layout: up the right half, down the left.
  return {0, 1, 3, 5, 7, 6, 4, 2};
}

VibrationProgram preset(const std::string& name, const PresetParams& p) {
  using K = ProgramError::Kind;
  if (p.n > kChannels) throw ProgramError(K::bad_channel, "preset uses more than 8 channels");
  VibrationProgram prog;
  prog.name = name;
  auto add = [&](std::size_t ch, double start, double duration) {
    prog.commands.push_back({ch, p.duty, start, duration});
  };
  if (name == "all-on") {
    for (std::size_t ch = 0; ch < kChannels; ++ch) add(ch, p.start_ms, p.duration_ms);
  } else if (name == "n-motors") {
    for (std::size_t ch = 0; ch < p.n; ++ch) add(ch, p.start_ms, p.duration_ms);
  } else if (name == "wave") {
    for (std::size_t ch = 0; ch < p.n; ++ch)
      add(ch, p.start_ms + static_cast<double>(ch) * p.stagger_ms, p.duration_ms);
  } else if (name == "ring") {
    const auto order = ring_order();
    for (std::size_t k = 0; k < kChannels; ++k)
      add(order[k], p.start_ms + static_cast<double>(k) * p.stagger_ms, p.duration_ms);
  } else if (name == "pulse-train") {
    const double on_ms = std::min(p.duration_ms, 0.5 * p.period_ms);
    for (std::size_t k = 0; k < p.pulses; ++k)
      for (std::size_t ch = 0; ch < p.n; ++ch)
        add(ch, p.start_ms + static_cast<double>(k) * p.period_ms, on_ms);
  } else {
    throw ProgramError(K::unknown_preset, "unknown preset '" + name + "'");
  }
  validate(prog);
  return prog;
}

VibrationProgram program_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (!doc.is_array()) throw std::invalid_argument("program file must be a JSON array");
  VibrationProgram prog;
  for (const auto& item : doc) {
    for (const auto& [key, _] : item.items())
      if (key != "channel" && key != "duty" && key != "start_ms" && key != "duration_ms")
        throw std::invalid_argument("unknown program key '" + key + "'");
    prog.commands.push_back({item.at("channel").get<std::size_t>(), item.at("duty").get<double>(),
                             item.at("start_ms").get<double>(),
                             item.at("duration_ms").get<double>()});
  }
  validate(prog);
  return prog;
}

std::string program_to_json(const VibrationProgram& program) {
  auto doc = nlohmann::json::array();
  for (const auto& c : program.commands)
    doc.push_back({{"channel", c.channel},
                   {"duty", c.duty},
                   {"start_ms", c.start_ms},
                   {"duration_ms", c.duration_ms}});
  return doc.dump();
}

}  // namespace eskin::actuation
