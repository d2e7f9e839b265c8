#pragma once

// Eight-channel vibration scheduling. Commands are PWM duty cycles per
// channel over time; motors follow the commanded duty with a first-order lag.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eskin::actuation {

inline constexpr std::size_t kChannels = 8;
inline constexpr double kSupplyVolts = 3.7;
inline constexpr double kRiseTauMs = 30.0;
// Past this many time constants after a command ends the motor is at rest.
inline constexpr double kSettleTaus = 5.0;

using Amplitudes = std::array<double, kChannels>;

struct VibrationCommand {
  std::size_t channel = 0;
  double duty = 0.0;
  double start_ms = 0.0;
  double duration_ms = 0.0;

  double end_ms() const { return start_ms + duration_ms; }
  friend bool operator==(const VibrationCommand&, const VibrationCommand&) = default;
};

struct VibrationProgram {
  std::vector<VibrationCommand> commands;
  std::optional<std::string> name;

  // Time after which every channel is at rest (0 for an empty program).
  double support_end_ms() const;
  friend bool operator==(const VibrationProgram&, const VibrationProgram&) = default;
};

class ProgramError : public std::invalid_argument {
 public:
  enum class Kind { overlap, duty_range, bad_channel, bad_duration, unknown_preset };
  ProgramError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Throws ProgramError on the first violated invariant.
void validate(const VibrationProgram& program);

// Motor amplitude per channel at time t (ms) under the first-order rise/fall.
Amplitudes amplitude_at(const VibrationProgram& program, double t_ms);

struct MotorState {
  Amplitudes amplitude{};
  Amplitudes volts{};  // commanded duty * supply voltage
};

MotorState motor_state(const VibrationProgram& program, double t_ms);

// Mean amplitude across channels: the scalar vibration intensity seen by
// whatever the skin is touching.
double mean_amplitude(const Amplitudes& a);

struct PresetParams {
  std::size_t n = kChannels;  // channels used, n-motors / pulse-train
  double duty = 0.5;
  double start_ms = 0.0;
  double duration_ms = 1000.0;
  double stagger_ms = 50.0;  // wave, ring
  double period_ms = 200.0;  // pulse-train; each pulse lasts min(duration_ms, period_ms / 2)
  std::size_t pulses = 5;    // pulse-train
};

// Known names: "all-on", "n-motors", "ring", "wave", "pulse-train".
VibrationProgram preset(const std::string& name, const PresetParams& params = {});

// Channels ordered around the footprint perimeter (used by "ring").
std::array<std::size_t, kChannels> ring_order();

// Program file: JSON array of {channel, duty, start_ms, duration_ms}.
VibrationProgram program_from_json(const std::string& text);
std::string program_to_json(const VibrationProgram& program);

}  // namespace eskin::actuation
