#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eskin/kernels.hpp"

namespace eskin::nn {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 42;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double perplexity_tolerance = 1e-5;
  Exec exec = Exec::parallel;
};

struct Embedding {
  std::size_t n = 0;
  std::vector<double> y;                // n x 2, row-major
  std::vector<double> point_perplexity;  // achieved by the bandwidth search
  double kl_divergence = 0.0;
};

// Per-point Gaussian bandwidths (as precisions beta = 1 / (2 sigma^2)) that
// match the target perplexity; `sq_dist` is n x n. Returns the conditional
// probabilities P(j|i), row-major, and writes the achieved perplexities.
std::vector<double> conditional_affinities(std::span<const double> sq_dist, std::size_t n,
                                           double perplexity, double tolerance,
                                           std::vector<double>& achieved, Exec exec);

// Exact t-SNE to two dimensions. Throws std::invalid_argument for fewer than
// two points, a perplexity the point count cannot support, or inputs with
// every point identical.
Embedding tsne_embed(std::span<const double> features, std::size_t n, std::size_t dim,
                     const TsneConfig& config = {});

// Mean silhouette over all points (Euclidean). Points alone in their cluster
// score 0. Throws std::invalid_argument unless there are at least two clusters.
double silhouette_score(std::span<const double> points, std::size_t n, std::size_t dim,
                        std::span<const std::size_t> labels);

}  // namespace eskin::nn
