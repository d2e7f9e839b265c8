#pragma once

// Magnetostatic forward model of the sensing skin: a magnetized film sampled
// as a grid of point dipoles above a plane of eight three-axis Hall sensors.
//
// Coordinates: x across the 40 mm width, y along the 65 mm height, z normal to
// the skin pointing away from the circuit board. The film mid-plane is z = 0,
// the sensor plane is z = -sensor_plane_gap. Positions are in mm and fields in
// uT at this interface; SI units are used internally.

#include <array>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "eskin/kernels.hpp"
#include "eskin/vec3.hpp"

namespace eskin::skin {

inline constexpr std::size_t kSensors = 8;
inline constexpr std::size_t kMotors = 8;
inline constexpr std::size_t kChannels = 3 * kSensors;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

struct SkinGeometry {
  double width_mm = 40.0;
  double height_mm = 65.0;
  double film_thickness_mm = 1.5;
  double elastomer_thickness_mm = 4.5;
  double circuit_thickness_mm = 1.0;
  double sensor_plane_gap_mm = 5.25;
  std::array<Point2, kSensors> sensors{};
  std::array<Point2, kMotors> motors{};

  // 4x4 cell grid, sensors on cells with (col + row) even, motors on the
  // others; both numbered row-major.
  static SkinGeometry standard();

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  double total_thickness_mm() const {
    return film_thickness_mm + elastomer_thickness_mm + circuit_thickness_mm;
  }
};

struct MagneticFilm {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double width_mm = 0.0;
  double height_mm = 0.0;
  double surface_field_target_mT = 2.0;
  std::vector<Vec3> rest_positions_mm;
  std::vector<Vec3> positions_mm;
  std::vector<Vec3> moments;  // A*m^2

  // Uniform film magnetized along +z, scaled so |B| at the canonical surface
  // probe equals target_mT.
  static MagneticFilm uniform(const SkinGeometry& geom, std::size_t nx = 20, std::size_t ny = 26,
                              double target_mT = 2.0);

  std::size_t size() const { return positions_mm.size(); }
};

// Point where the surface field target is enforced: footprint centre on the
// outer film surface.
Vec3 canonical_probe_mm(const SkinGeometry& geom);

struct Press {
  Point2 center;
  double depth_mm = 0.0;
  double radius_mm = 1.0;
};

struct Slide {
  Point2 center;
  double depth_mm = 0.0;
  double radius_mm = 1.0;
  Point2 offset;
};

struct NoDeformation {};

using Deformation = std::variant<NoDeformation, Press, Slide>;

// depth >= 0, depth <= max_depth_mm, radius > 0.
void validate(const Deformation& d, double max_depth_mm);

// Point-dipole field in tesla; moment in A*m^2, displacement in m.
// Throws SingularityError for zero displacement.
Vec3 dipole_field(const Vec3& moment, const Vec3& displacement);

// Gaussian-bump indentation with moments tilted along the surface normal.
MagneticFilm deform(const MagneticFilm& film, const Deformation& d);
// Superposed indentations (e.g. a multi-patch contact). Bumps are evaluated at
// the rest coordinates and their depths add.
MagneticFilm deform(const MagneticFilm& film, std::span<const Deformation> ds);

struct FieldReading {
  std::array<Vec3, kSensors> b_uT{};

  std::array<double, kChannels> flatten() const;
  friend bool operator==(const FieldReading&, const FieldReading&) = default;
};

FieldReading sensor_field(const MagneticFilm& film, const SkinGeometry& geom,
                          Exec exec = Exec::serial);

struct MotorModel {
  // Peak moment of one motor's oscillating dipole at full amplitude.
  double moment_Am2 = 1.5e-4;
  // Height of the motor's magnet centre above the sensor plane.
  double height_mm = 1.5;
};

// Peak additive field per sensor axis (>= 0) with every motor oscillating in
// phase along z, scaled by its amplitude in [0, 1].
FieldReading motor_interference(std::span<const double> motor_amplitudes,
                                const SkinGeometry& geom, const MotorModel& motor = {});

// Signed in-phase motor field at the oscillation crest (uT).
FieldReading motor_field_signed(std::span<const double> motor_amplitudes,
                                const SkinGeometry& geom, const MotorModel& motor);

// Kinematic force model: indentation = force / stiffness.
struct ContactStiffness {
  double n_per_mm = 1.33;
  double depth_for(double force_n) const { return force_n / n_per_mm; }
};

}  // namespace eskin::skin
