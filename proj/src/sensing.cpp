#include "eskin/sensing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <stdexcept>

#include "eskin/errors.hpp"

namespace eskin::sensing {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SensorSample CalibrationState::apply(const SensorSample& s) const {
  SensorSample out = s;
  for (std::size_t c = 0; c < kChannels; ++c) out.values[c] -= offsets[c];
  return out;
}

CalibrationState calibrate_zero(std::span<const SensorSample> stream, std::size_t n) {
  if (n == 0) throw InsufficientDataError("calibration needs at least one sample");
  if (stream.size() < n) throw InsufficientDataError("calibration stream shorter than requested");
  // Mean taken relative to the first sample so a constant stream zeroes exactly.
  CalibrationState cal;
  std::array<double, kChannels> dev{};
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t c = 0; c < kChannels; ++c) dev[c] += stream[i].values[c] - stream[0].values[c];
  for (std::size_t c = 0; c < kChannels; ++c)
    cal.offsets[c] = stream[0].values[c] + dev[c] / static_cast<double>(n);
  cal.n_samples_used = n;
  return cal;
}

void NoiseModel::validate() const {
  if (!(gaussian_sigma_uT >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  if (!(quantization_step_uT > 0.0)) throw std::invalid_argument("quantization step must be > 0");
}

SensorSample apply_noise(const SensorSample& sample, const NoiseModel& model,
                         std::uint64_t sample_index) {
  model.validate();
  SensorSample out = sample;
  std::mt19937_64 gen(mix_seed(model.rng_seed, sample_index));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : out.values) {
    if (model.gaussian_sigma_uT > 0.0) v += model.gaussian_sigma_uT * gauss(gen);
    v = std::round(v / model.quantization_step_uT) * model.quantization_step_uT;
  }
  return out;
}

std::vector<skin::Deformation> deformations_at(const DeformationSchedule& schedule, double t_ms) {
  std::vector<skin::Deformation> out;
  for (const auto& ev : schedule) {
    if (t_ms < ev.start_ms || t_ms >= ev.start_ms + ev.duration_ms) continue;
    const double phase = (t_ms - ev.start_ms) / ev.duration_ms;
    const double s = std::sin(std::numbers::pi * phase);
    const double envelope = s * s;
    for (const auto& p : ev.patches) {
      skin::Slide slide;
      slide.center = p.center;
      slide.depth_mm = p.depth_mm * envelope;
      slide.radius_mm = p.radius_mm;
      slide.offset = {ev.slip.x * phase, ev.slip.y * phase};
      out.emplace_back(slide);
    }
  }
  return out;
}

TactileWindow acquire_window(const DeformationSchedule& schedule, const skin::SkinGeometry& geom,
                             const skin::MagneticFilm& film, const AcquisitionConfig& cfg) {
  if (!(cfg.rate_hz > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  if (cfg.steps != kSteps) throw std::invalid_argument("windows are exactly 60 steps");
  cfg.noise.validate();
  const double period_ms = 1000.0 / cfg.rate_hz;
  const double window_ms = period_ms * static_cast<double>(cfg.steps);
  for (const auto& ev : schedule) {
    if (ev.start_ms < 0.0 || ev.start_ms + ev.duration_ms > window_ms + 1e-9)
      throw std::invalid_argument("contact extends past the acquisition window");
    if (!(ev.duration_ms > 0.0)) throw std::invalid_argument("contact duration must be positive");
    for (const auto& p : ev.patches) skin::validate(skin::Deformation{p}, geom.elastomer_thickness_mm);
  }

  const auto rest = skin::sensor_field(film, geom).flatten();
  auto sample_of = [&](const std::array<double, kChannels>& field, std::uint64_t index, double t) {
    SensorSample s{t, field};
    return apply_noise(s, cfg.noise, index);
  };

  std::vector<SensorSample> quiet;
  quiet.reserve(cfg.calibration_samples);
  for (std::size_t i = 0; i < cfg.calibration_samples; ++i)
    quiet.push_back(sample_of(rest, i, -period_ms * static_cast<double>(cfg.calibration_samples - i)));
  const auto cal = calibrate_zero(quiet, cfg.calibration_samples);

  TactileWindow w;
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = period_ms * static_cast<double>(k);
    const auto active = deformations_at(schedule, t);
    const auto field =
        active.empty() ? rest : skin::sensor_field(skin::deform(film, active), geom).flatten();
    const auto zeroed = cal.apply(sample_of(field, cfg.calibration_samples + k, t));
    for (std::size_t c = 0; c < kChannels; ++c) w.at(c, k) = static_cast<float>(zeroed.values[c]);
  }
  return w;
}

std::vector<ObjectClass> default_object_classes() {
  auto mk = [](std::string name, double r, double d, std::size_t patches, double spacing,
               double axis, double slip) {
    ObjectClass c;
    c.name = std::move(name);
    c.radius_mm = r;
    c.depth_mm = d;
    c.patches = patches;
    c.patch_spacing_mm = spacing;
    c.axis_deg = axis;
    c.slip_mm = slip;
    return c;
  };
  return {
      mk("green_bean", 2.5, 1.2, 3, 7.0, 90.0, 0.0),
      mk("sugar_cube", 5.5, 2.4, 1, 0.0, 90.0, 0.0),
      mk("hazelnut", 3.5, 2.2, 1, 0.0, 90.0, 0.0),
      mk("chestnut", 4.5, 1.7, 2, 4.0, 0.0, 0.0),
      mk("peanut", 3.0, 1.4, 2, 8.0, 90.0, 0.0),
      mk("almond", 3.0, 1.6, 2, 9.0, 0.0, 0.0),
      mk("grape", 6.0, 2.0, 1, 0.0, 90.0, 0.0),
      mk("walnut", 6.0, 1.6, 3, 3.0, 0.0, 0.0),
      mk("candy", 4.5, 1.6, 1, 0.0, 90.0, 5.0),
      mk("pea", 2.0, 1.5, 1, 0.0, 90.0, 0.0),
      mk("coffee_bean", 2.5, 1.8, 2, 3.0, 90.0, 0.0),
      mk("pen", 2.0, 1.5, 5, 5.0, 0.0, 0.0),
  };
}

DeformationSchedule sample_grasp(const ObjectClass& cls, const skin::SkinGeometry& geom,
                                 std::uint64_t seed, const AcquisitionConfig& acq) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double cx = geom.width_mm / 2.0 + cls.position_jitter_mm * unit(gen);
  const double cy = geom.height_mm / 2.0 + cls.position_jitter_mm * unit(gen);
  const double angle = (cls.axis_deg + cls.angle_jitter_deg * unit(gen)) * std::numbers::pi / 180.0;
  const double depth = std::min(cls.depth_mm * (1.0 + cls.depth_jitter * unit(gen)),
                                geom.elastomer_thickness_mm);
  const double window_ms = 1000.0 / acq.rate_hz * static_cast<double>(acq.steps);
  const double slack = std::max(0.0, window_ms - cls.duration_ms - 1.0);
  const double start = std::floor(slack * 0.5 * (1.0 + cls.onset_jitter * unit(gen)));

  const skin::Point2 axis{std::cos(angle), std::sin(angle)};
  ContactEvent ev;
  ev.start_ms = start;
  ev.duration_ms = cls.duration_ms;
  ev.slip = {axis.x * cls.slip_mm, axis.y * cls.slip_mm};
  for (std::size_t k = 0; k < cls.patches; ++k) {
    const double along =
        (static_cast<double>(k) - 0.5 * static_cast<double>(cls.patches - 1)) * cls.patch_spacing_mm;
    ev.patches.push_back({{cx + along * axis.x, cy + along * axis.y}, depth, cls.radius_mm});
  }
  return {ev};
}

Dataset build_dataset(std::span<const ObjectClass> classes, const DatasetConfig& cfg,
                      const skin::SkinGeometry& geom, const skin::MagneticFilm& film, Exec exec) {
  if (cfg.per_class == 0) throw std::invalid_argument("per_class must be >= 1");
  if (classes.empty() || classes.size() > kClasses)
    throw std::invalid_argument("between 1 and 12 object classes required");
  const std::size_t total = classes.size() * cfg.per_class;

  Dataset ds;
  ds.windows.resize(total);
  auto make = [&](std::size_t idx) {
    const std::size_t c = idx / cfg.per_class;
    const std::uint64_t item_seed = mix_seed(cfg.seed, idx);
    auto acq = cfg.acquisition;
    acq.noise.rng_seed = mix_seed(item_seed, 0xA11CE);
    const auto schedule = sample_grasp(classes[c], geom, item_seed, acq);
    TactileWindow w = acquire_window(schedule, geom, film, acq);
    w.label = static_cast<std::uint8_t>(c);
    ds.windows[idx] = w;
  };
  const auto n = static_cast<std::ptrdiff_t>(total);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) make(static_cast<std::size_t>(i));
  } else {
    bool failed = false;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        make(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp atomic write
        failed = true;
      }
    }
    if (failed) throw std::runtime_error("dataset generation failed");
  }

  std::mt19937_64 gen(cfg.seed);
  std::shuffle(ds.windows.begin(), ds.windows.end(), gen);
  ds.n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(total)));
  return ds;
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'E', 'S', 'K', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 2 + 2;
constexpr std::size_t kRecordBytes = 1 + 4 * kWindowSize;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(std::span<const TactileWindow> windows) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + windows.size() * kRecordBytes);
  for (auto b : kMagic) out.push_back(b);
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(windows.size()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(kChannels));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(kSteps));
  for (const auto& w : windows) {
    out.push_back(w.label.value_or(kUnlabeled));
    for (float f : w.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<TactileWindow> decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw std::runtime_error("dataset: truncated header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw std::runtime_error("dataset: bad magic");
  if (get_le<std::uint16_t>(bytes, 4) != kVersion) throw std::runtime_error("dataset: unsupported version");
  const auto n = get_le<std::uint32_t>(bytes, 6);
  if (get_le<std::uint16_t>(bytes, 10) != kChannels || get_le<std::uint16_t>(bytes, 12) != kSteps)
    throw std::runtime_error("dataset: unexpected window shape");
  if (bytes.size() != kHeaderBytes + static_cast<std::size_t>(n) * kRecordBytes)
    throw std::runtime_error("dataset: size does not match window count");
  std::vector<TactileWindow> out(n);
  std::size_t at = kHeaderBytes;
  for (auto& w : out) {
    const std::uint8_t label = bytes[at++];
    if (label != kUnlabeled) {
      if (label >= kClasses) throw std::runtime_error("dataset: label out of range");
      w.label = label;
    }
    for (auto& f : w.data) {
      f = std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
      if (!std::isfinite(f)) throw std::runtime_error("dataset: non-finite value");
      at += 4;
    }
  }
  return out;
}

void save_dataset(const std::string& path, std::span<const TactileWindow> windows) {
  const auto bytes = encode_dataset(windows);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::vector<TactileWindow> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_dataset(bytes);
}

}  // namespace eskin::sensing
