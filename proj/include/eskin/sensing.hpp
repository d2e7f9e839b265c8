#pragma once

// Signal chain from simulated fields to calibrated sensor streams and the
// fixed-shape tactile windows used for classification.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eskin/kernels.hpp"
#include "eskin/skin_model.hpp"

namespace eskin::sensing {

inline constexpr std::size_t kChannels = skin::kChannels;  // sensor-major, axis-minor
inline constexpr std::size_t kSteps = 60;
inline constexpr std::size_t kWindowSize = kChannels * kSteps;
inline constexpr std::size_t kClasses = 12;
inline constexpr std::uint8_t kUnlabeled = 255;

struct SensorSample {
  double t_ms = 0.0;
  std::array<double, kChannels> values{};
};

struct CalibrationState {
  std::array<double, kChannels> offsets{};
  std::size_t n_samples_used = 0;

  SensorSample apply(const SensorSample& s) const;
};

// Per-channel mean of the first n samples. Throws InsufficientDataError when
// n == 0 or the stream is shorter than n.
CalibrationState calibrate_zero(std::span<const SensorSample> stream, std::size_t n);

struct NoiseModel {
  double gaussian_sigma_uT = 0.1;
  double quantization_step_uT = 0.01;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Adds Gaussian noise, then rounds each channel to the nearest multiple of the
// quantization step. The draw depends only on (rng_seed, sample_index).
SensorSample apply_noise(const SensorSample& sample, const NoiseModel& model,
                         std::uint64_t sample_index);

struct TactileWindow {
  // Row-major channels x steps.
  std::array<float, kWindowSize> data{};
  std::optional<std::uint8_t> label;

  float at(std::size_t channel, std::size_t step) const { return data[channel * kSteps + step]; }
  float& at(std::size_t channel, std::size_t step) { return data[channel * kSteps + step]; }
};

// One contact during a window: a set of indentation patches at their peak,
// scaled in depth by a sin^2 envelope over [start, start + duration) and
// translated by `slip` linearly over the contact.
struct ContactEvent {
  double start_ms = 0.0;
  double duration_ms = 0.0;
  std::vector<skin::Press> patches;
  skin::Point2 slip;
};

using DeformationSchedule = std::vector<ContactEvent>;

// Deformations active at time t for a schedule.
std::vector<skin::Deformation> deformations_at(const DeformationSchedule& schedule, double t_ms);

struct AcquisitionConfig {
  double rate_hz = 200.0;
  std::size_t steps = kSteps;
  std::size_t calibration_samples = 20;
  NoiseModel noise{};
};

// Simulates `steps` samples of the schedule, zeroed against a contact-free
// calibration run that precedes the window. Throws std::invalid_argument if a
// contact extends past the window.
TactileWindow acquire_window(const DeformationSchedule& schedule, const skin::SkinGeometry& geom,
                             const skin::MagneticFilm& film, const AcquisitionConfig& cfg);

// Contact profile of one object class as felt by a gripper-mounted skin.
struct ObjectClass {
  std::string name;
  double radius_mm = 4.0;
  double depth_mm = 1.5;
  std::size_t patches = 1;        // contact patches along the grasp axis
  double patch_spacing_mm = 0.0;
  double axis_deg = 90.0;         // nominal grasp axis, degrees from +x
  double angle_jitter_deg = 10.0;
  double position_jitter_mm = 1.0;
  double depth_jitter = 0.08;     // relative, uniform +-
  double slip_mm = 0.0;           // slip along the grasp axis during contact
  double duration_ms = 200.0;
  double onset_jitter = 0.2;      // contact start spread, fraction of the window slack
};

// Twelve presets standing in for the grasped objects.
std::vector<ObjectClass> default_object_classes();

struct Dataset {
  std::vector<TactileWindow> windows;  // shuffled; first n_train are training
  std::size_t n_train = 0;

  std::span<const TactileWindow> train() const { return {windows.data(), n_train}; }
  std::span<const TactileWindow> test() const {
    return {windows.data() + n_train, windows.size() - n_train};
  }
};

struct DatasetConfig {
  std::size_t per_class = 200;
  std::uint64_t seed = 42;
  double train_fraction = 0.7;  // n_train = floor(fraction * N)
  AcquisitionConfig acquisition{};
};

// Random grasp schedule for one class (position, angle, depth jitter).
DeformationSchedule sample_grasp(const ObjectClass& cls, const skin::SkinGeometry& geom,
                                 std::uint64_t seed, const AcquisitionConfig& acq);

Dataset build_dataset(std::span<const ObjectClass> classes, const DatasetConfig& cfg,
                      const skin::SkinGeometry& geom, const skin::MagneticFilm& film,
                      Exec exec = Exec::parallel);

// Binary dataset file ("ESKD", little-endian).
std::vector<std::uint8_t> encode_dataset(std::span<const TactileWindow> windows);
std::vector<TactileWindow> decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::string& path, std::span<const TactileWindow> windows);
std::vector<TactileWindow> load_dataset(const std::string& path);

// 64-bit seed mixing (splitmix64) for per-item RNG streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace eskin::sensing
