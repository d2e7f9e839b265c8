#include "eskin/skin_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "eskin/errors.hpp"

namespace eskin::skin {
namespace {

constexpr double kMmToM = 1e-3;
constexpr double kTToUT = 1e6;

Vec3 to_m(const Vec3& mm) { return mm * kMmToM; }

// Rotates v by the rotation taking +z onto unit vector n.
Vec3 rotate_z_to(const Vec3& v, const Vec3& n) {
  const Vec3 z{0.0, 0.0, 1.0};
  const Vec3 axis = cross(z, n);
  const double s = norm(axis);
  const double c = n.z;
  if (s < 1e-15) return c >= 0.0 ? v : Vec3{v.x, -v.y, -v.z};
  const Vec3 k = axis * (1.0 / s);
  // Rodrigues.
  return v * c + cross(k, v) * s + k * (dot(k, v) * (1.0 - c));
}

struct Bump {
  double cx, cy, depth, radius;
};

Bump bump_of(const Deformation& d) {
  if (const auto* p = std::get_if<Press>(&d)) return {p->center.x, p->center.y, p->depth_mm, p->radius_mm};
  if (const auto* s = std::get_if<Slide>(&d))
    return {s->center.x + s->offset.x, s->center.y + s->offset.y, s->depth_mm, s->radius_mm};
  return {0.0, 0.0, 0.0, 1.0};
}

}  // namespace

SkinGeometry SkinGeometry::standard() {
  SkinGeometry g;
  const double cw = g.width_mm / 4.0;
  const double ch = g.height_mm / 4.0;
  std::size_t si = 0;
  std::size_t mi = 0;
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col) {
      const Point2 c{(col + 0.5) * cw, (row + 0.5) * ch};
      if ((row + col) % 2 == 0)
        g.sensors[si++] = c;
      else
        g.motors[mi++] = c;
    }
  }
  return g;
}

void SkinGeometry::validate() const {
  if (width_mm <= 0.0 || height_mm <= 0.0) throw std::invalid_argument("footprint must be positive");
  if (film_thickness_mm <= 0.0 || elastomer_thickness_mm <= 0.0 || circuit_thickness_mm < 0.0)
    throw std::invalid_argument("layer thicknesses must be positive");
  if (total_thickness_mm() > 7.0 + 1e-12)
    throw std::invalid_argument("layer stack exceeds 7 mm");
  if (sensor_plane_gap_mm <= 0.0) throw std::invalid_argument("sensor plane gap must be positive");

  const double cw = width_mm / 4.0;
  const double ch = height_mm / 4.0;
  std::array<int, 16> owner{};  // 0 free, 1 sensor, 2 motor
  auto place = [&](const Point2& p, int who, const char* what) {
    if (!(p.x > 0.0 && p.x < width_mm && p.y > 0.0 && p.y < height_mm))
      throw std::invalid_argument(std::string(what) + " outside footprint");
    const int col = static_cast<int>(p.x / cw);
    const int row = static_cast<int>(p.y / ch);
    auto& cell = owner[static_cast<std::size_t>(row * 4 + col)];
    if (cell != 0) throw std::invalid_argument(std::string(what) + " shares a grid cell");
    const int expected = (row + col) % 2 == 0 ? 1 : 2;
    if (who != expected) throw std::invalid_argument(std::string(what) + " breaks checkerboard");
    cell = who;
  };
  for (const auto& s : sensors) place(s, 1, "sensor");
  for (const auto& m : motors) place(m, 2, "motor");
}

Vec3 canonical_probe_mm(const SkinGeometry& geom) {
  return {geom.width_mm / 2.0, geom.height_mm / 2.0, geom.film_thickness_mm / 2.0};
}

MagneticFilm MagneticFilm::uniform(const SkinGeometry& geom, std::size_t nx, std::size_t ny,
                                   double target_mT) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("dipole grid must be non-empty");
  if (target_mT <= 0.0) throw std::invalid_argument("surface field target must be positive");
  MagneticFilm f;
  f.nx = nx;
  f.ny = ny;
  f.width_mm = geom.width_mm;
  f.height_mm = geom.height_mm;
  f.surface_field_target_mT = target_mT;
  f.rest_positions_mm.reserve(nx * ny);
  const double px = geom.width_mm / static_cast<double>(nx);
  const double py = geom.height_mm / static_cast<double>(ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      f.rest_positions_mm.push_back({(static_cast<double>(i) + 0.5) * px,
                                     (static_cast<double>(j) + 0.5) * py, 0.0});
  f.positions_mm = f.rest_positions_mm;

  // Field of unit moments at the probe, then rescale.
  f.moments.assign(nx * ny, Vec3{0.0, 0.0, 1.0});
  std::vector<Vec3> src(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) src[k] = to_m(f.positions_mm[k]);
  std::array<Vec3, 1> probe{to_m(canonical_probe_mm(geom))};
  std::array<Vec3, 1> out{};
  kernels::superpose_dipoles(src, f.moments, probe, out);
  const double unit_T = norm(out[0]);
  const double scale = target_mT * 1e-3 / unit_T;
  for (auto& m : f.moments) m = Vec3{0.0, 0.0, scale};
  return f;
}

void validate(const Deformation& d, double max_depth_mm) {
  if (std::holds_alternative<NoDeformation>(d)) return;
  const Bump b = bump_of(d);
  if (!(b.depth >= 0.0)) throw std::invalid_argument("deformation depth must be >= 0");
  if (b.depth > max_depth_mm) throw std::invalid_argument("deformation deeper than elastomer");
  if (!(b.radius > 0.0)) throw std::invalid_argument("deformation radius must be > 0");
}

Vec3 dipole_field(const Vec3& moment, const Vec3& displacement) {
  if (dot(displacement, displacement) == 0.0)
    throw SingularityError("dipole field evaluated at the source");
  return kernels::point_dipole(moment, displacement);
}

MagneticFilm deform(const MagneticFilm& film, const Deformation& d) {
  return deform(film, std::span<const Deformation>(&d, 1));
}

MagneticFilm deform(const MagneticFilm& film, std::span<const Deformation> ds) {
  MagneticFilm out = film;
  std::vector<Bump> bumps;
  bumps.reserve(ds.size());
  for (const auto& d : ds) {
    if (std::holds_alternative<NoDeformation>(d)) continue;
    validate(d, std::numeric_limits<double>::infinity());
    bumps.push_back(bump_of(d));
  }
  if (bumps.empty()) return out;

  for (std::size_t k = 0; k < film.size(); ++k) {
    const Vec3& rest = film.rest_positions_mm[k];
    double w = 0.0;
    double wx = 0.0;
    double wy = 0.0;
    for (const auto& b : bumps) {
      const double dx = rest.x - b.cx;
      const double dy = rest.y - b.cy;
      const double inv_r2 = 1.0 / (b.radius * b.radius);
      const double wk = b.depth * std::exp(-0.5 * (dx * dx + dy * dy) * inv_r2);
      w += wk;
      wx -= wk * dx * inv_r2;
      wy -= wk * dy * inv_r2;
    }
    out.positions_mm[k] = film.positions_mm[k] - Vec3{0.0, 0.0, w};
    if (wx != 0.0 || wy != 0.0) {
      // Surface z = -w(x, y); its upward normal is (w_x, w_y, 1).
      Vec3 n{wx, wy, 1.0};
      n *= 1.0 / norm(n);
      out.moments[k] = rotate_z_to(film.moments[k], n);
    }
  }
  return out;
}

std::array<double, kChannels> FieldReading::flatten() const {
  std::array<double, kChannels> v{};
  for (std::size_t s = 0; s < kSensors; ++s) {
    v[3 * s] = b_uT[s].x;
    v[3 * s + 1] = b_uT[s].y;
    v[3 * s + 2] = b_uT[s].z;
  }
  return v;
}

FieldReading sensor_field(const MagneticFilm& film, const SkinGeometry& geom, Exec exec) {
  if (film.width_mm != geom.width_mm || film.height_mm != geom.height_mm)
    throw std::invalid_argument("film and geometry footprints differ");
  std::vector<Vec3> src(film.size());
  for (std::size_t k = 0; k < film.size(); ++k) src[k] = to_m(film.positions_mm[k]);
  std::array<Vec3, kSensors> probes{};
  for (std::size_t s = 0; s < kSensors; ++s)
    probes[s] = to_m(Vec3{geom.sensors[s].x, geom.sensors[s].y, -geom.sensor_plane_gap_mm});
  FieldReading r;
  kernels::superpose_dipoles(src, film.moments, probes, r.b_uT, exec);
  for (auto& b : r.b_uT) b *= kTToUT;
  return r;
}

FieldReading motor_field_signed(std::span<const double> motor_amplitudes,
                                const SkinGeometry& geom, const MotorModel& motor) {
  if (motor_amplitudes.size() != kMotors) throw std::invalid_argument("expected 8 motor amplitudes");
  std::array<Vec3, kMotors> src{};
  std::array<Vec3, kMotors> moments{};
  for (std::size_t m = 0; m < kMotors; ++m) {
    const double a = motor_amplitudes[m];
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("motor amplitude outside [0, 1]");
    src[m] = to_m(Vec3{geom.motors[m].x, geom.motors[m].y,
                       -geom.sensor_plane_gap_mm + motor.height_mm});
    moments[m] = Vec3{0.0, 0.0, a * motor.moment_Am2};
  }
  std::array<Vec3, kSensors> probes{};
  for (std::size_t s = 0; s < kSensors; ++s)
    probes[s] = to_m(Vec3{geom.sensors[s].x, geom.sensors[s].y, -geom.sensor_plane_gap_mm});
  FieldReading r;
  kernels::superpose_dipoles(src, moments, probes, r.b_uT);
  for (auto& b : r.b_uT) b *= kTToUT;
  return r;
}

FieldReading motor_interference(std::span<const double> motor_amplitudes,
                                const SkinGeometry& geom, const MotorModel& motor) {
  FieldReading r = motor_field_signed(motor_amplitudes, geom, motor);
  for (auto& b : r.b_uT) b = Vec3{std::abs(b.x), std::abs(b.y), std::abs(b.z)};
  return r;
}

}  // namespace eskin::skin
