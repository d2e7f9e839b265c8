#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "eskin/kernels.hpp"
#include "eskin/nn/network.hpp"
#include "eskin/sensing.hpp"

namespace eskin::nn {

using sensing::TactileWindow;
inline constexpr std::size_t kClasses = sensing::kClasses;

using CnnModel = Network<float>;

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over the epoch's mini-batches
  double train_accuracy = 0.0;  // full pass after the epoch
  double test_accuracy = 0.0;  // NaN when no test set
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  CnnModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch SGD with momentum on cross-entropy. Per-sample gradients may be
// computed concurrently but are summed in sample order, so the result depends
// only on the seed. Throws InsufficientDataError for an empty set and
// std::invalid_argument for missing or out-of-range labels.
TrainResult train(std::span<const TactileWindow> train_set, const TrainConfig& config,
                  std::span<const TactileWindow> test_set = {}, const EpochCallback& on_epoch = {});

// Same loop for any network shape (used for degenerate/sub-model tests).
TrainHistory train_network(CnnModel& model, std::span<const TactileWindow> train_set,
                           const TrainConfig& config, std::span<const TactileWindow> test_set = {},
                           const EpochCallback& on_epoch = {});

// 1 / RMS of all training values; maps inputs to roughly unit scale.
float fit_input_scale(std::span<const TactileWindow> windows);

std::array<double, kClasses> predict(const CnnModel& model, const TactileWindow& window);
std::size_t predict_class(const CnnModel& model, const TactileWindow& window);

struct Evaluation {
  double accuracy = 0.0;
  std::array<std::array<std::size_t, kClasses>, kClasses> confusion{};  // [true][predicted]
  std::size_t total = 0;
};

Evaluation evaluate(const CnnModel& model, std::span<const TactileWindow> test_set,
                    Exec exec = Exec::parallel);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t params_checked = 0;
  std::size_t layers_covered = 0;
  std::size_t kinks_skipped = 0;
};

// Analytic gradient vs central differences over a seeded random subset of at
// least `min_params` parameters drawn from every parametric layer. Relative
// error is |a - n| / max(|a|, |n|, abs_floor); gradients below abs_floor are
// thus compared in absolute terms. A parameter whose +-epsilon perturbation
// flips a ReLU or moves a pool maximum sits on a kink and is replaced by the
// next candidate.
GradCheckResult grad_check(const Network<double>& model, std::span<const float> input,
                           std::size_t label, double epsilon = 1e-4, std::size_t min_params = 200,
                           std::uint64_t seed = 7, double abs_floor = 1e-6);

// Penultimate (post-ReLU dense) activations, one row per window.
std::vector<double> embed_features(const CnnModel& model, std::span<const TactileWindow> windows,
                                   std::size_t& dim);

}  // namespace eskin::nn
