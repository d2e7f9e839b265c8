#pragma once

// Data-parallel inner loops. Every kernel has a serial reference path and an
// OpenMP path; each output element is owned by exactly one iteration and is
// accumulated in a fixed order, so both paths produce bit-identical results.

#include <cstddef>
#include <span>

#include "eskin/vec3.hpp"

namespace eskin {

enum class Exec { serial, parallel };

namespace kernels {

// mu0 / 4pi in T*m/A.
inline constexpr double kMu0Over4Pi = 1e-7;

// Point-dipole flux density (T) of `moment` (A*m^2) at `r` (m) from the
// dipole. Caller guarantees r != 0.
inline Vec3 point_dipole(const Vec3& moment, const Vec3& r) {
  const double r2 = dot(r, r);
  const double inv_r = 1.0 / std::sqrt(r2);
  const double inv_r3 = inv_r * inv_r * inv_r;
  const double inv_r5 = inv_r3 / r2;
  const double mr = dot(moment, r);
  return (3.0 * mr * inv_r5) * r * kMu0Over4Pi - moment * (inv_r3 * kMu0Over4Pi);
}

// out[p] = sum_s point_dipole(moments[s], probes[p] - sources[s]), positions
// in metres. Throws SingularityError if a probe coincides with a source.
void superpose_dipoles(std::span<const Vec3> sources, std::span<const Vec3> moments,
                       std::span<const Vec3> probes, std::span<Vec3> out,
                       Exec exec = Exec::serial);

// out[i*n + j] = |x_i - x_j|^2 for row-major points x (n x dim).
void pairwise_sq_distances(std::span<const double> x, std::size_t n, std::size_t dim,
                           std::span<double> out, Exec exec = Exec::serial);

// out[i*nb + j] = |a_i - b_j|^2, a is na x dim, b is nb x dim.
void cross_sq_distances(std::span<const float> a, std::size_t na, std::span<const float> b,
                        std::size_t nb, std::size_t dim, std::span<double> out,
                        Exec exec = Exec::serial);

// Exact t-SNE gradient of KL(P||Q) w.r.t. 2-D embedding y (n x 2).
// `p` is the symmetric joint-probability matrix (n x n), already scaled by
// any exaggeration factor. `num` is scratch of size n*n. Returns KL(P||Q).
double tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                     std::span<double> grad, std::span<double> num, Exec exec = Exec::serial);

}  // namespace kernels
}  // namespace eskin
