#pragma once

// Three-stage motor interference trace on one sensor: quiet baseline, all
// motors vibrating, then a vertical press with the motors off.

#include <array>
#include <cstddef>
#include <vector>

#include "eskin/skin_model.hpp"

namespace eskin::skin {

struct InterferenceConfig {
  double press_force_n = 4.0;
  std::size_t sensor = 3;  // press is centred on this sensor
  double press_radius_mm = 5.0;
  double rate_hz = 200.0;
  double stage_ms = 2000.0;
  double press_ramp_ms = 500.0;
  double vibration_hz = 20.0;
  double noise_floor_uT = 1.0;
  ContactStiffness stiffness{};
};

struct InterferenceTrace {
  std::vector<double> t_ms;
  std::vector<std::array<double, kChannels>> delta_uT;  // change from baseline, all channels
  std::array<std::size_t, 3> stage_start{};            // sample index where each stage begins
  std::array<double, 3> max_delta_uT{};  // peak |dB| (vector norm) on the probed sensor per stage
  double noise_floor_uT = 0.0;

  // Stage 2 over stage 3 peak.
  double ratio() const { return max_delta_uT[1] / max_delta_uT[2]; }
};

// press_force_n may be 0 (stage 3 then stays flat). Throws std::invalid_argument
// for negative force, a bad sensor index or non-positive timing parameters.
InterferenceTrace interference_experiment(const SkinGeometry& geom, const MagneticFilm& film,
                                          const MotorModel& motor, const InterferenceConfig& cfg = {},
                                          Exec exec = Exec::serial);

}  // namespace eskin::skin
