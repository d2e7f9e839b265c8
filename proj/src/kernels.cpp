#include "eskin/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "eskin/errors.hpp"

namespace eskin::kernels {
namespace {

Vec3 field_at(std::span<const Vec3> sources, std::span<const Vec3> moments, const Vec3& probe) {
  Vec3 acc;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const Vec3 r = probe - sources[s];
    if (dot(r, r) == 0.0) throw SingularityError("probe coincides with a dipole source");
    acc += point_dipole(moments[s], r);
  }
  return acc;
}

}  // namespace

void superpose_dipoles(std::span<const Vec3> sources, std::span<const Vec3> moments,
                       std::span<const Vec3> probes, std::span<Vec3> out, Exec exec) {
  if (sources.size() != moments.size() || probes.size() != out.size())
    throw std::invalid_argument("superpose_dipoles: size mismatch");
  const auto n = static_cast<std::ptrdiff_t>(probes.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t p = 0; p < n; ++p) out[p] = field_at(sources, moments, probes[p]);
    return;
  }
  // Exceptions must not escape an OpenMP region.
  bool singular = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    try {
      out[p] = field_at(sources, moments, probes[p]);
    } catch (const SingularityError&) {
#pragma omp atomic write
      singular = true;
    }
  }
  if (singular) throw SingularityError("probe coincides with a dipole source");
}

void pairwise_sq_distances(std::span<const double> x, std::size_t n, std::size_t dim,
                           std::span<double> out, Exec exec) {
  if (x.size() != n * dim || out.size() != n * n)
    throw std::invalid_argument("pairwise_sq_distances: size mismatch");
  auto row = [&](std::size_t i) {
    const double* xi = x.data() + i * dim;
    for (std::size_t j = 0; j < n; ++j) {
      const double* xj = x.data() + j * dim;
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double t = xi[k] - xj[k];
        d += t * t;
      }
      out[i * n + j] = d;
    }
  };
  const auto ni = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < ni; ++i) row(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < ni; ++i) row(static_cast<std::size_t>(i));
  }
}

void cross_sq_distances(std::span<const float> a, std::size_t na, std::span<const float> b,
                        std::size_t nb, std::size_t dim, std::span<double> out, Exec exec) {
  if (a.size() != na * dim || b.size() != nb * dim || out.size() != na * nb)
    throw std::invalid_argument("cross_sq_distances: size mismatch");
  auto row = [&](std::size_t i) {
    const float* ai = a.data() + i * dim;
    for (std::size_t j = 0; j < nb; ++j) {
      const float* bj = b.data() + j * dim;
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double t = static_cast<double>(ai[k]) - static_cast<double>(bj[k]);
        d += t * t;
      }
      out[i * nb + j] = d;
    }
  };
  const auto ni = static_cast<std::ptrdiff_t>(na);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < ni; ++i) row(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < ni; ++i) row(static_cast<std::size_t>(i));
  }
}

double tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,
                     std::span<double> grad, std::span<double> num, Exec exec) {
  if (p.size() != n * n || y.size() != 2 * n || grad.size() != 2 * n || num.size() != n * n)
    throw std::invalid_argument("tsne_gradient: size mismatch");
  std::vector<double> row_sum(n, 0.0);
  std::vector<double> row_kl(n, 0.0);
  const auto ni = static_cast<std::ptrdiff_t>(n);

  auto kernel_row = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        num[i * n + j] = 0.0;
        continue;
      }
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = v;
      s += v;
    }
    row_sum[i] = s;
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < ni; ++i) kernel_row(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) kernel_row(static_cast<std::size_t>(i));
  }

  double z = 0.0;
  for (double s : row_sum) z += s;
  const double inv_z = 1.0 / z;

  auto grad_row = [&](std::size_t i) {
    double gx = 0.0;
    double gy = 0.0;
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = num[i * n + j];
      const double q = std::max(v * inv_z, 1e-300);
      const double pij = p[i * n + j];
      const double mult = (pij - q) * v;
      gx += mult * (y[2 * i] - y[2 * j]);
      gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
      if (pij > 0.0) kl += pij * std::log(pij / q);
    }
    grad[2 * i] = 4.0 * gx;
    grad[2 * i + 1] = 4.0 * gy;
    row_kl[i] = kl;
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < ni; ++i) grad_row(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < ni; ++i) grad_row(static_cast<std::size_t>(i));
  }

  double kl = 0.0;
  for (double v : row_kl) kl += v;
  return kl;
}

}  // namespace eskin::kernels
