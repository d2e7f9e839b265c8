#pragma once

// Granular discharge from a tilted, vibrated spoon onto a scale, the
// resolution metric over scale traces, and the experiment harnesses.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eskin/actuation.hpp"
#include "eskin/kernels.hpp"

namespace eskin::weighing {

inline constexpr double kClumpCutoff = 0.6;  // vibration level that fully suppresses clumping
inline constexpr double kDefaultDt = 0.05;   // s, scale readout period

struct Material {
  std::string name;
  double angle_of_repose_deg = 30.0;
  double base_flow_gps = 1.0;
  double vib_gain = 1.0;
  double static_flow = 0.0;  // flow factor with no vibration (c0)
  double clump_mass_mean_g = 0.0;
  double clump_rate_no_vib = 0.0;  // events/s above the repose angle
  double humidity_clump_factor = 1.0;

  void validate() const;
};

Material flour();
Material sugar();
Material sesame();
// "flour", "sugar", "sesame"; throws std::invalid_argument otherwise.
Material material_by_name(const std::string& name);

struct SpoonState {
  double tilt_deg = 0.0;
  std::int64_t load_ug = 0;  // remaining load in micrograms

  double load_g() const { return static_cast<double>(load_ug) * 1e-6; }
};

std::int64_t grams_to_ug(double g);

// Deterministic part of the discharge rate (g/s).
double continuous_flow_gps(const Material& m, double tilt_deg, double vib);
// Poisson rate of clump events (1/s); zero at or below the repose angle.
double clump_rate(const Material& m, double tilt_deg, double vib);

struct StepResult {
  std::int64_t released_ug = 0;
  SpoonState state;
};

// One integration step. Released mass never exceeds the remaining load and
// released + remaining always equals the load before the step.
StepResult step(const SpoonState& state, const Material& m, double vib, double dt, std::mt19937_64& rng);

// Piecewise-linear tilt keyframes (seconds, degrees), held after the last.
class TiltSchedule {
 public:
  TiltSchedule() = default;
  explicit TiltSchedule(std::vector<std::pair<double, double>> keyframes);

  static TiltSchedule ramp_hold(double to_deg, double ramp_s);

  double at(double t_s) const;
  const std::vector<std::pair<double, double>>& keyframes() const { return keys_; }

 private:
  std::vector<std::pair<double, double>> keys_;
};

struct WeighTrace {
  double dt = kDefaultDt;
  std::vector<double> masses;  // cumulative scale reading (g), masses[0] = 0

  std::optional<double> time_to_reach(double grams) const;
};

WeighTrace run_trial(const TiltSchedule& tilt, const actuation::VibrationProgram& program,
                     const Material& m, double load_g, std::uint64_t seed, double horizon_s,
                     double dt = kDefaultDt);

class NoNonzeroDifferences : public std::domain_error {
 public:
  NoNonzeroDifferences() : std::domain_error("trace has no nonzero differences at this interval") {}
};

// Mean of |m[i+a] - m[i]| over the nonzero differences.
double epsilon(std::span<const double> masses, std::size_t a = 1);

void write_trace_csv(std::ostream& out, const WeighTrace& trace);

// Nine-combination grid: tilt {30, 45, 50} x {2, 4, 8} motors at 50% duty.
struct ComboConfig {
  double load_g = 5.0;
  double ramp_s = 2.0;
  double horizon_s = 150.0;
  double duty = 0.5;
  std::uint64_t seed = 42;
};

struct ComboFamily {
  int label = 0;  // 1..9, angle-major
  double tilt_deg = 0.0;
  std::size_t motors = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> eps;  // a = 1
  std::vector<double> t50;  // NaN when 50% was never reached
  std::vector<WeighTrace> traces;

  double mean_t50() const;
};

std::vector<ComboFamily> nine_combo_experiment(const Material& m, std::size_t seed_count,
                                               const ComboConfig& cfg = {}, Exec exec = Exec::parallel);

struct TrendReport {
  bool ok = true;
  std::vector<std::string> failures;
};

// Faster means for more motors (fixed angle) and for steeper angles (fixed
// motor count). Each ordering must hold in the mean and the 95% bootstrap
// interval of the difference must exclude zero.
TrendReport check_trends(std::span<const ComboFamily> families, std::size_t resamples = 2000,
                         std::uint64_t seed = 7);

// JSON lines {label, tilt_deg, motors, seed, eps, t50}; t50 is null when unreached.
void write_combo_jsonl(std::ostream& out, std::span<const ComboFamily> families);

// Flour under a 0->90 deg ramp, with and without vibration.
struct ResolutionConfig {
  double load_g = 2.0;
  double ramp_s = 20.0;
  double horizon_s = 40.0;
  std::size_t motors = 8;
  double duty = 0.5;
  std::uint64_t seed = 42;
};

struct ResolutionResult {
  std::vector<double> eps_still;
  std::vector<double> eps_vibrated;
  std::vector<double> max_step_still;
  std::vector<double> max_step_vibrated;
  std::vector<WeighTrace> still;
  std::vector<WeighTrace> vibrated;

  double mean_eps_still() const;
  double mean_eps_vibrated() const;
  double ratio() const { return mean_eps_still() / mean_eps_vibrated(); }
  // Seeds where the vibrated trace's largest step is strictly smaller.
  std::size_t smaller_max_step_count() const;
};

ResolutionResult resolution_experiment(const Material& m, std::size_t seed_count,
                                       const ResolutionConfig& cfg = {}, Exec exec = Exec::parallel);

}  // namespace eskin::weighing
