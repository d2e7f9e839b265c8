#include "eskin/interference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "eskin/actuation.hpp"

namespace eskin::skin {

InterferenceTrace interference_experiment(const SkinGeometry& geom, const MagneticFilm& film,
                                          const MotorModel& motor, const InterferenceConfig& cfg,
                                          Exec exec) {
  if (!(cfg.press_force_n >= 0.0)) throw std::invalid_argument("press force must be >= 0");
  if (cfg.sensor >= kSensors) throw std::invalid_argument("sensor index out of range");
  if (!(cfg.rate_hz > 0.0) || !(cfg.stage_ms > 0.0) || !(cfg.press_ramp_ms >= 0.0))
    throw std::invalid_argument("timing parameters must be positive");

  const std::size_t per_stage = static_cast<std::size_t>(std::llround(cfg.stage_ms * cfg.rate_hz / 1000.0));
  const double dt_ms = 1000.0 / cfg.rate_hz;
  const auto base = sensor_field(film, geom, exec).flatten();

  actuation::PresetParams all_on;
  all_on.duty = 1.0;
  all_on.duration_ms = cfg.stage_ms;
  const auto program = actuation::preset("all-on", all_on);
  const std::array<double, kMotors> full{1, 1, 1, 1, 1, 1, 1, 1};
  const auto crest = motor_field_signed(full, geom, motor).flatten();

  const double depth = std::min(cfg.stiffness.depth_for(cfg.press_force_n), geom.elastomer_thickness_mm);
  const Point2 at = geom.sensors[cfg.sensor];

  InterferenceTrace tr;
  tr.noise_floor_uT = cfg.noise_floor_uT;
  tr.t_ms.reserve(3 * per_stage);
  tr.delta_uT.reserve(3 * per_stage);
  for (std::size_t stage = 0; stage < 3; ++stage) {
    tr.stage_start[stage] = tr.t_ms.size();
    for (std::size_t i = 0; i < per_stage; ++i) {
      const double t = static_cast<double>(i) * dt_ms;
      std::array<double, kChannels> d{};
      if (stage == 1) {
        // Every motor runs the same command, so channel 0 stands for all.
        const double a = actuation::amplitude_at(program, t)[0];
        const double phase = std::sin(2.0 * std::numbers::pi * cfg.vibration_hz * t / 1000.0);
        for (std::size_t c = 0; c < kChannels; ++c) d[c] = crest[c] * a * phase;
      } else if (stage == 2 && depth > 0.0) {
        const double ramp = cfg.press_ramp_ms > 0.0 ? std::min(1.0, t / cfg.press_ramp_ms) : 1.0;
        const Deformation press = Press{at, depth * ramp, cfg.press_radius_mm};
        const auto now = sensor_field(deform(film, press), geom, exec).flatten();
        for (std::size_t c = 0; c < kChannels; ++c) d[c] = now[c] - base[c];
      }
      const std::size_t s = 3 * cfg.sensor;
      const double mag = std::sqrt(d[s] * d[s] + d[s + 1] * d[s + 1] + d[s + 2] * d[s + 2]);
      tr.max_delta_uT[stage] = std::max(tr.max_delta_uT[stage], mag);
      tr.t_ms.push_back(static_cast<double>(stage * per_stage + i) * dt_ms);
      tr.delta_uT.push_back(d);
    }
  }
  return tr;
}

}  // namespace eskin::skin
