#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "eskin/kernels.hpp"
#include "eskin/sensing.hpp"

namespace eskin::nn {

// Euclidean k-nearest-neighbour on flattened windows. Every training window
// tied with the k-th distance votes; vote ties go to the lowest class id.
double knn_baseline(std::span<const sensing::TactileWindow> train_set,
                    std::span<const sensing::TactileWindow> test_set, std::size_t k,
                    Exec exec = Exec::parallel);

struct LogisticConfig {
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
};

// Multinomial logistic regression on mean-centred flattened windows under one global scale.
double logistic_baseline(std::span<const sensing::TactileWindow> train_set,
                         std::span<const sensing::TactileWindow> test_set,
                         const LogisticConfig& config = {});

}  // namespace eskin::nn
