#include <gtest/gtest.h>

#include <cmath>

#include "eskin/errors.hpp"
#include "eskin/skin_model.hpp"

using namespace eskin;
using namespace eskin::skin;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(DipoleField, AxialClosedForm) {
  // mu0 m / (2 pi r^3) with m = 1, r = 0.1
  auto b = dipole_field({0, 0, 1}, {0, 0, 0.1});
  EXPECT_LE(rel(b.z, 2.0e-4), 1e-9);
  EXPECT_EQ(b.x, 0.0);
  EXPECT_EQ(b.y, 0.0);
}

TEST(DipoleField, EquatorialClosedForm) {
  auto b = dipole_field({0, 0, 1}, {0.1, 0, 0});
  EXPECT_LE(rel(b.z, -1.0e-4), 1e-9);
  EXPECT_NEAR(b.x, 0.0, 1e-20);
}

TEST(DipoleField, ZeroMomentIsZero) {
  auto b = dipole_field({0, 0, 0}, {0.03, -0.02, 0.01});
  EXPECT_EQ(b, (Vec3{0, 0, 0}));
}

TEST(DipoleField, ZeroDisplacementThrows) {
  EXPECT_THROW(dipole_field({0, 0, 1}, {0, 0, 0}), SingularityError);
}

TEST(DipoleField, OffAxisMatchesVectorFormula) {
  // Independent evaluation of (mu0/4pi)(3(m.rhat)rhat - m)/r^3.
  Vec3 m{0.3, -0.2, 0.9};
  Vec3 r{0.02, 0.05, -0.04};
  double rn = norm(r);
  Vec3 rh = r * (1.0 / rn);
  Vec3 expect = (3.0 * dot(m, rh) * rh - m) * (1e-7 / (rn * rn * rn));
  auto b = dipole_field(m, r);
  EXPECT_LE(norm(b - expect) / norm(expect), 1e-12);
}

TEST(SkinGeometry, StandardLayoutIsCheckerboard) {
  auto g = SkinGeometry::standard();
  EXPECT_NO_THROW(g.validate());
  EXPECT_DOUBLE_EQ(g.width_mm, 40.0);
  EXPECT_DOUBLE_EQ(g.height_mm, 65.0);
  for (std::size_t i = 0; i < kSensors; ++i)
    for (std::size_t j = 0; j < kMotors; ++j) EXPECT_FALSE(g.sensors[i] == g.motors[j]);
  EXPECT_LE(g.total_thickness_mm(), 7.0);
}

TEST(SkinGeometry, RejectsStackOverSevenMm) {
  auto g = SkinGeometry::standard();
  g.elastomer_thickness_mm = 6.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(SkinGeometry, RejectsSensorOutsideFootprint) {
  auto g = SkinGeometry::standard();
  g.sensors[0] = {-1.0, 5.0};
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(MagneticFilm, UniformHitsSurfaceTarget) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  ASSERT_EQ(film.size(), 20u * 26u);
  auto probe = canonical_probe_mm(g);
  Vec3 b{};
  for (std::size_t i = 0; i < film.size(); ++i)
    b += dipole_field(film.moments[i], (probe - film.positions_mm[i]) * 1e-3);
  EXPECT_LE(std::abs(norm(b) * 1e3 - 2.0) / 2.0, 0.01);
  for (const auto& m : film.moments) {
    EXPECT_EQ(m.x, 0.0);
    EXPECT_EQ(m.y, 0.0);
    EXPECT_EQ(m.z, film.moments[0].z);
  }
  for (const auto& p : film.rest_positions_mm) EXPECT_EQ(p.z, 0.0);
}

TEST(Deform, NoneIsIdentity) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto d = deform(film, Deformation{NoDeformation{}});
  EXPECT_EQ(d.positions_mm, film.positions_mm);
  EXPECT_EQ(d.moments, film.moments);
}

TEST(Deform, PeakDipoleMovesStraightDown) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  const auto& p = film.rest_positions_mm[137];
  auto d = deform(film, Deformation{Press{{p.x, p.y}, 1.2, 3.0}});
  EXPECT_NEAR(d.positions_mm[137].z, -1.2, 1e-12);
  EXPECT_EQ(d.positions_mm[137].x, p.x);
  EXPECT_EQ(d.positions_mm[137].y, p.y);
  EXPECT_NEAR(d.moments[137].x, 0.0, 1e-15);
  EXPECT_NEAR(d.moments[137].y, 0.0, 1e-15);
}

TEST(Deform, PreservesMomentMagnitudes) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto d = deform(film, Deformation{Slide{{14.0, 30.0}, 2.0, 4.0, {3.0, -2.0}}});
  for (std::size_t i = 0; i < film.size(); ++i)
    EXPECT_NEAR(norm(d.moments[i]), norm(film.moments[i]), 1e-12 * norm(film.moments[i]));
}

TEST(Deform, SlideEqualsShiftedPress) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto a = deform(film, Deformation{Slide{{14.0, 30.0}, 2.0, 4.0, {3.0, -2.0}}});
  auto b = deform(film, Deformation{Press{{17.0, 28.0}, 2.0, 4.0}});
  EXPECT_EQ(a.positions_mm, b.positions_mm);
  EXPECT_EQ(a.moments, b.moments);
}

TEST(Deform, RejectsInvalid) {
  EXPECT_THROW(validate(Deformation{Press{{1, 1}, -0.1, 2.0}}, 4.5), std::invalid_argument);
  EXPECT_THROW(validate(Deformation{Press{{1, 1}, 5.0, 2.0}}, 4.5), std::invalid_argument);
  EXPECT_THROW(validate(Deformation{Press{{1, 1}, 1.0, 0.0}}, 4.5), std::invalid_argument);
}

TEST(SensorField, UndeformedMirrorPairsMatch) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto r = sensor_field(film, g);
  // Point reflection through the footprint centre maps sensor i to 7 - i.
  for (std::size_t i = 0; i < kSensors; ++i) {
    double a = norm(r.b_uT[i]);
    double b = norm(r.b_uT[kSensors - 1 - i]);
    EXPECT_LE(std::abs(a - b) / a, 1e-9) << i;
  }
}

TEST(SensorField, CentredPressIsPointSymmetric) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto base = sensor_field(film, g);
  auto r = sensor_field(deform(film, Deformation{Press{{20.0, 32.5}, 2.0, 5.0}}), g);
  for (std::size_t i = 0; i < kSensors; ++i) {
    double a = norm(r.b_uT[i] - base.b_uT[i]);
    double b = norm(r.b_uT[kSensors - 1 - i] - base.b_uT[kSensors - 1 - i]);
    EXPECT_LE(std::abs(a - b), 1e-6 * std::max(a, 1.0)) << i;
  }
}

TEST(SensorField, NearerSensorSeesLargerChange) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto base = sensor_field(film, g);
  auto c = g.sensors[2];
  auto r = sensor_field(deform(film, Deformation{Press{c, 2.0, 5.0}}), g);
  double near = norm(r.b_uT[2] - base.b_uT[2]);
  double far = norm(r.b_uT[7] - base.b_uT[7]);
  EXPECT_GT(near, far);
}

TEST(SensorField, LinearInMoments) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto a = sensor_field(film, g);
  auto doubled = film;
  for (auto& m : doubled.moments) m *= 2.0;
  auto b = sensor_field(doubled, g);
  for (std::size_t i = 0; i < kSensors; ++i) EXPECT_LE(norm(b.b_uT[i] - 2.0 * a.b_uT[i]), 1e-9 * norm(a.b_uT[i]));
}

TEST(SensorField, SerialAndParallelAgreeBitwise) {
  auto g = SkinGeometry::standard();
  auto film = deform(MagneticFilm::uniform(g), Deformation{Press{{11.0, 40.0}, 1.5, 4.0}});
  EXPECT_EQ(sensor_field(film, g, Exec::serial), sensor_field(film, g, Exec::parallel));
}

TEST(SensorField, SuperpositionOfSubsets) {
  auto g = SkinGeometry::standard();
  auto film = MagneticFilm::uniform(g);
  auto whole = sensor_field(film, g);
  MagneticFilm left = film, right = film;
  for (std::size_t i = 0; i < film.size(); ++i) {
    if (i % 2) left.moments[i] = {};
    else right.moments[i] = {};
  }
  auto l = sensor_field(left, g);
  auto r = sensor_field(right, g);
  for (std::size_t i = 0; i < kSensors; ++i)
    EXPECT_LE(norm(l.b_uT[i] + r.b_uT[i] - whole.b_uT[i]), 1e-6 * norm(whole.b_uT[i]));
}

TEST(MotorInterference, ZeroAmplitudeIsZero) {
  auto g = SkinGeometry::standard();
  std::array<double, kMotors> amps{};
  auto r = motor_interference(amps, g);
  for (const auto& b : r.b_uT) EXPECT_EQ(b, (Vec3{0, 0, 0}));
}

TEST(MotorInterference, ScalesWithAmplitude) {
  auto g = SkinGeometry::standard();
  std::array<double, kMotors> half, full;
  half.fill(0.5);
  full.fill(1.0);
  auto a = motor_interference(half, g);
  auto b = motor_interference(full, g);
  for (std::size_t i = 0; i < kSensors; ++i) EXPECT_LE(norm(b.b_uT[i] - 2.0 * a.b_uT[i]), 1e-9);
}

TEST(MotorInterference, RejectsOutOfRangeAmplitude) {
  auto g = SkinGeometry::standard();
  std::array<double, kMotors> amps{};
  amps[3] = 1.5;
  EXPECT_THROW(motor_interference(amps, g), std::invalid_argument);
}
