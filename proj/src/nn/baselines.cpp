#include "eskin/nn/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "eskin/errors.hpp"

namespace eskin::nn {
namespace {

using sensing::kClasses;
using sensing::kWindowSize;
using sensing::TactileWindow;

void check(std::span<const TactileWindow> set, const char* what) {
  if (set.empty()) throw InsufficientDataError(std::string(what) + " set is empty");
  for (const auto& w : set)
    if (!w.label || *w.label >= kClasses)
      throw std::invalid_argument(std::string(what) + " set has a missing or out-of-range label");
}

std::vector<float> flatten(std::span<const TactileWindow> set) {
  std::vector<float> out;
  out.reserve(set.size() * kWindowSize);
  for (const auto& w : set) out.insert(out.end(), w.data.begin(), w.data.end());
  return out;
}

}  // namespace

double knn_baseline(std::span<const TactileWindow> train_set, std::span<const TactileWindow> test_set,
                    std::size_t k, Exec exec) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  check(train_set, "training");
  check(test_set, "test");
  const auto a = flatten(test_set);
  const auto b = flatten(train_set);
  std::vector<double> dist(test_set.size() * train_set.size());
  kernels::cross_sq_distances(a, test_set.size(), b, train_set.size(), kWindowSize, dist, exec);

  const std::size_t kk = std::min(k, train_set.size());
  std::size_t correct = 0;
  std::vector<double> row;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    row.assign(dist.begin() + static_cast<std::ptrdiff_t>(i * train_set.size()),
               dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * train_set.size()));
    std::vector<double> sorted = row;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kk - 1), sorted.end());
    const double kth = sorted[kk - 1];
    std::array<std::size_t, kClasses> votes{};
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] <= kth) ++votes[*train_set[j].label];
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    if (best == *test_set[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

double logistic_baseline(std::span<const TactileWindow> train_set, std::span<const TactileWindow> test_set,
                         const LogisticConfig& cfg) {
  check(train_set, "training");
  check(test_set, "test");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1)
    throw std::invalid_argument("invalid logistic configuration");
  constexpr std::size_t D = kWindowSize;

  // Per-channel means, one global scale. Per-feature standardisation would
  // blow quiet (noise-only) inputs up to the same size as contact signal.
  std::vector<double> mean(D, 0.0);
  for (const auto& w : train_set)
    for (std::size_t d = 0; d < D; ++d) mean[d] += w.data[d];
  for (auto& m : mean) m /= static_cast<double>(train_set.size());
  double sum_sq = 0.0;
  for (const auto& w : train_set)
    for (std::size_t d = 0; d < D; ++d) {
      const double t = w.data[d] - mean[d];
      sum_sq += t * t;
    }
  const double rms = std::sqrt(sum_sq / static_cast<double>(train_set.size() * D));
  const double inv_rms = rms > 1e-12 ? 1.0 / rms : 1.0;
  auto features = [&](const TactileWindow& w, std::vector<double>& x) {
    for (std::size_t d = 0; d < D; ++d) x[d] = (w.data[d] - mean[d]) * inv_rms;
  };

  std::vector<double> weights(kClasses * D, 0.0), bias(kClasses, 0.0);
  std::vector<double> gw(kClasses * D), gb(kClasses);
  std::vector<double> x(D);
  std::array<double, kClasses> z{};
  auto logits = [&](const std::vector<double>& xv) {
    for (std::size_t c = 0; c < kClasses; ++c) {
      double acc = bias[c];
      const double* row = weights.data() + c * D;
      for (std::size_t d = 0; d < D; ++d) acc += row[d] * xv[d];
      z[c] = acc;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : z) v /= sum;
  };

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, order.size() - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t b = 0; b < bs; ++b) {
        const auto& w = train_set[order[start + b]];
        features(w, x);
        logits(x);
        for (std::size_t c = 0; c < kClasses; ++c) {
          const double g = z[c] - (c == *w.label ? 1.0 : 0.0);
          gb[c] += g;
          double* row = gw.data() + c * D;
          for (std::size_t d = 0; d < D; ++d) row[d] += g * x[d];
        }
      }
      const double step = cfg.learning_rate / static_cast<double>(bs);
      for (std::size_t i = 0; i < weights.size(); ++i)
        weights[i] -= step * gw[i] + cfg.learning_rate * cfg.l2 * weights[i];
      for (std::size_t c = 0; c < kClasses; ++c) bias[c] -= step * gb[c];
    }
  }

  std::size_t correct = 0;
  for (const auto& w : test_set) {
    features(w, x);
    logits(x);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == *w.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

}  // namespace eskin::nn
