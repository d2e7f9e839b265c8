#include <gtest/gtest.h>

#include <random>

#include "eskin/errors.hpp"
#include "eskin/sensing.hpp"

using namespace eskin;
using namespace eskin::sensing;

namespace {

std::vector<SensorSample> constant_stream(double c, std::size_t n) {
  std::vector<SensorSample> s(n);
  for (auto& x : s) x.values.fill(c);
  return s;
}

const skin::SkinGeometry& geom() {
  static auto g = skin::SkinGeometry::standard();
  return g;
}
const skin::MagneticFilm& film() {
  static auto f = skin::MagneticFilm::uniform(geom());
  return f;
}

}  // namespace

TEST(Calibration, ConstantStreamZeroesExactly) {
  auto s = constant_stream(3.25, 10);
  auto cal = calibrate_zero(s, 10);
  for (double o : cal.offsets) EXPECT_DOUBLE_EQ(o, 3.25);
  for (const auto& x : s)
    for (double v : cal.apply(x).values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(cal.n_samples_used, 10u);
}

TEST(Calibration, GaussianMeanWithinFiveSigmaBound) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(-12.0, 1.0);
  std::vector<SensorSample> s(10000);
  for (auto& x : s)
    for (auto& v : x.values) v = g(rng);
  auto cal = calibrate_zero(s, s.size());
  for (double o : cal.offsets) EXPECT_NEAR(o, -12.0, 0.05);
}

TEST(Calibration, ErrorsOnMissingData) {
  auto s = constant_stream(1.0, 5);
  EXPECT_THROW(calibrate_zero(s, 0), InsufficientDataError);
  EXPECT_THROW(calibrate_zero(s, 6), InsufficientDataError);
}

TEST(Calibration, ZeroedQuiescentStreamIsIdempotent) {
  NoiseModel nm{0.1, 0.01, 3};
  std::vector<SensorSample> s(500);
  for (std::size_t i = 0; i < s.size(); ++i) {
    SensorSample x;
    x.values.fill(40.0);
    s[i] = apply_noise(x, nm, i);
  }
  auto cal = calibrate_zero(s, s.size());
  std::vector<SensorSample> zeroed;
  for (const auto& x : s) zeroed.push_back(cal.apply(x));
  auto again = calibrate_zero(zeroed, zeroed.size());
  for (double o : again.offsets) EXPECT_LE(std::abs(o), 1e-9);
}

TEST(Noise, RoundsToStep) {
  NoiseModel nm{0.0, 0.1, 0};
  SensorSample s;
  s.values.fill(0.26);
  for (double v : apply_noise(s, nm, 0).values) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(Noise, TinyStepIsIdentity) {
  NoiseModel nm{0.0, 1e-9, 0};
  SensorSample s;
  for (std::size_t i = 0; i < kChannels; ++i) s.values[i] = 0.123456 * static_cast<double>(i);
  auto out = apply_noise(s, nm, 0);
  for (std::size_t i = 0; i < kChannels; ++i) EXPECT_NEAR(out.values[i], s.values[i], 1e-9);
}

TEST(Noise, DeterministicPerSeedAndIndex) {
  NoiseModel nm{0.5, 0.01, 77};
  SensorSample s;
  auto a = apply_noise(s, nm, 12);
  auto b = apply_noise(s, nm, 12);
  auto c = apply_noise(s, nm, 13);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
}

TEST(Noise, RejectsBadModel) {
  EXPECT_THROW((NoiseModel{-1.0, 0.01, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((NoiseModel{0.1, 0.0, 0}.validate()), std::invalid_argument);
}

TEST(AcquireWindow, EmptyScheduleIsZeroWithoutNoise) {
  AcquisitionConfig cfg;
  cfg.noise.gaussian_sigma_uT = 0.0;
  auto w = acquire_window({}, geom(), film(), cfg);
  for (float v : w.data) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(w.data.size(), 24u * 60u);
}

TEST(AcquireWindow, DeeperContactGivesLargerPeak) {
  AcquisitionConfig cfg;
  cfg.noise.gaussian_sigma_uT = 0.0;
  auto peak = [&](double depth) {
    ContactEvent ev{50.0, 200.0, {skin::Press{geom().sensors[2], depth, 4.0}}, {}};
    auto w = acquire_window({ev}, geom(), film(), cfg);
    float m = 0.0f;
    for (float v : w.data) m = std::max(m, std::abs(v));
    return m;
  };
  EXPECT_GT(peak(2.0), peak(1.0));
}

TEST(AcquireWindow, ContactPastWindowThrows) {
  AcquisitionConfig cfg;
  ContactEvent ev{200.0, 200.0, {skin::Press{{20, 30}, 1.0, 4.0}}, {}};
  EXPECT_THROW(acquire_window({ev}, geom(), film(), cfg), std::invalid_argument);
}

TEST(Dataset, SmallBuildHasBalancedClassesAndFloorSplit) {
  DatasetConfig cfg;
  cfg.per_class = 3;
  auto classes = default_object_classes();
  ASSERT_EQ(classes.size(), kClasses);
  auto d = build_dataset(classes, cfg, geom(), film());
  EXPECT_EQ(d.windows.size(), 36u);
  EXPECT_EQ(d.n_train, 25u);  // floor(0.7 * 36)
  std::array<int, kClasses> count{};
  for (const auto& w : d.windows) {
    ASSERT_TRUE(w.label.has_value());
    ++count[*w.label];
  }
  for (int c : count) EXPECT_EQ(c, 3);
}

TEST(Dataset, PerClassOneSplitsByFloor) {
  DatasetConfig cfg;
  cfg.per_class = 1;
  auto classes = default_object_classes();
  auto d = build_dataset(classes, cfg, geom(), film());
  EXPECT_EQ(d.windows.size(), 12u);
  EXPECT_EQ(d.n_train, 8u);
}

TEST(Dataset, PerClassZeroThrows) {
  DatasetConfig cfg;
  cfg.per_class = 0;
  auto classes = default_object_classes();
  EXPECT_THROW(build_dataset(classes, cfg, geom(), film()), std::invalid_argument);
}

TEST(Dataset, SameSeedSameBytesSerialOrParallel) {
  DatasetConfig cfg;
  cfg.per_class = 2;
  auto classes = default_object_classes();
  auto a = build_dataset(classes, cfg, geom(), film(), Exec::serial);
  auto b = build_dataset(classes, cfg, geom(), film(), Exec::parallel);
  EXPECT_EQ(encode_dataset(a.windows), encode_dataset(b.windows));
  cfg.seed = 43;
  auto c = build_dataset(classes, cfg, geom(), film());
  EXPECT_NE(encode_dataset(a.windows), encode_dataset(c.windows));
}

TEST(DatasetFile, RoundTripAndHeader) {
  DatasetConfig cfg;
  cfg.per_class = 1;
  auto classes = default_object_classes();
  auto d = build_dataset(classes, cfg, geom(), film());
  d.windows[0].label.reset();
  auto bytes = encode_dataset(d.windows);
  ASSERT_GE(bytes.size(), 14u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ESKD");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);
  EXPECT_EQ(bytes[6] | (bytes[7] << 8), 12);
  EXPECT_EQ(bytes[10] | (bytes[11] << 8), 24);
  EXPECT_EQ(bytes[12] | (bytes[13] << 8), 60);
  EXPECT_EQ(bytes.size(), 14u + 12u * (1u + 24u * 60u * 4u));
  EXPECT_EQ(bytes[14], 255);  // unlabeled
  auto back = decode_dataset(bytes);
  ASSERT_EQ(back.size(), d.windows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].data, d.windows[i].data);
    EXPECT_EQ(back[i].label, d.windows[i].label);
  }
}

TEST(DatasetFile, RejectsCorruptHeaders) {
  auto bytes = encode_dataset({});
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_dataset(bad), std::runtime_error);
  bad = bytes;
  bad[10] = 23;
  EXPECT_THROW(decode_dataset(bad), std::runtime_error);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_dataset(bad), std::runtime_error);
}

TEST(DeformationsAt, OutsideContactIsEmpty) {
  ContactEvent ev{50.0, 100.0, {skin::Press{{20, 30}, 1.0, 4.0}}, {}};
  EXPECT_TRUE(deformations_at({ev}, 10.0).empty());
  EXPECT_TRUE(deformations_at({ev}, 160.0).empty());
  EXPECT_FALSE(deformations_at({ev}, 100.0).empty());
}
