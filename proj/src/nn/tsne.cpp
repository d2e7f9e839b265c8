#include "eskin/nn/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace eskin::nn {
namespace {

// Entropy (nats) of row i for precision beta; fills row with P(j|i).
double row_entropy(std::span<const double> d, std::size_t i, std::size_t n, double beta, double dmin,
                   std::span<double> row) {
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = d[i * n + j] - dmin;
    const double v = std::exp(-beta * shifted);
    row[j] = v;
    sum += v;
    weighted += v * shifted;
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  return std::log(sum) + beta * weighted / sum;
}

}  // namespace

std::vector<double> conditional_affinities(std::span<const double> sq_dist, std::size_t n,
                                           double perplexity, double tolerance,
                                           std::vector<double>& achieved, Exec exec) {
  std::vector<double> p(n * n, 0.0);
  achieved.assign(n, 0.0);
  const double target_h = std::log(perplexity);

  auto solve = [&](std::size_t i) {
    std::span<double> row(p.data() + i * n, n);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, sq_dist[i * n + j]);
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = row_entropy(sq_dist, i, n, beta, dmin, row);
    for (int it = 0; it < 500; ++it) {
      if (std::abs(std::exp(h) - perplexity) <= tolerance) break;
      if (h > target_h) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = row_entropy(sq_dist, i, n, beta, dmin, row);
    }
    achieved[i] = std::exp(h);
  };

  const auto ni = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < ni; ++i) solve(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < ni; ++i) solve(static_cast<std::size_t>(i));
  }
  return p;
}

Embedding tsne_embed(std::span<const double> features, std::size_t n, std::size_t dim,
                     const TsneConfig& cfg) {
  if (n < 2) throw std::invalid_argument("t-SNE needs at least two points");
  if (features.size() != n * dim) throw std::invalid_argument("feature matrix size mismatch");
  if (!(cfg.perplexity >= 1.0)) throw std::invalid_argument("perplexity must be >= 1");
  const double max_perplexity = n >= 5 ? (static_cast<double>(n) - 1.0) / 3.0 : static_cast<double>(n - 1);
  if (n >= 5 ? cfg.perplexity >= max_perplexity : cfg.perplexity > max_perplexity)
    throw std::invalid_argument("perplexity too large for the number of points");

  std::vector<double> d(n * n);
  kernels::pairwise_sq_distances(features, n, dim, d, cfg.exec);
  if (*std::max_element(d.begin(), d.end()) == 0.0)
    throw std::invalid_argument("t-SNE input is degenerate: all points identical");

  Embedding e;
  e.n = n;
  auto cond = conditional_affinities(d, n, cfg.perplexity, cfg.perplexity_tolerance,
                                     e.point_perplexity, cfg.exec);
  std::vector<double> p(n * n);
  const double norm = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = i == j ? 0.0 : std::max((cond[i * n + j] + cond[j * n + i]) * norm, 1e-12);

  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1e-4);
  e.y.resize(2 * n);
  for (auto& v : e.y) v = gauss(gen);

  std::vector<double> grad(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0), num(n * n);
  std::vector<double> p_ex(n * n);
  for (std::size_t i = 0; i < p.size(); ++i) p_ex[i] = p[i] * cfg.early_exaggeration;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const bool exaggerate = it < cfg.exaggeration_iters;
    const double momentum = it < cfg.exaggeration_iters ? 0.5 : 0.8;
    e.kl_divergence = kernels::tsne_gradient(exaggerate ? p_ex : p, e.y, n, grad, num, cfg.exec);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
      gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
      update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
      e.y[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += e.y[2 * i];
      my += e.y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      e.y[2 * i] -= mx;
      e.y[2 * i + 1] -= my;
    }
  }
  // KL against the un-exaggerated P for the final layout.
  e.kl_divergence = kernels::tsne_gradient(p, e.y, n, grad, num, cfg.exec);
  return e;
}

double silhouette_score(std::span<const double> points, std::size_t n, std::size_t dim,
                        std::span<const std::size_t> labels) {
  if (points.size() != n * dim || labels.size() != n)
    throw std::invalid_argument("silhouette: size mismatch");
  std::size_t k = 0;
  for (auto l : labels) k = std::max(k, l + 1);
  std::vector<std::size_t> count(k, 0);
  for (auto l : labels) ++count[l];
  if (std::count_if(count.begin(), count.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw std::invalid_argument("silhouette: need at least two clusters");

  double total = 0.0;
  std::vector<double> sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double d = points[i * dim + c] - points[j * dim + c];
        d2 += d * d;
      }
      sum[labels[j]] += std::sqrt(d2);
    }
    std::size_t own = labels[i];
    if (count[own] < 2) continue;
    double a = sum[own] / static_cast<double>(count[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own && count[c] > 0) b = std::min(b, sum[c] / static_cast<double>(count[c]));
    double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

}  // namespace eskin::nn
