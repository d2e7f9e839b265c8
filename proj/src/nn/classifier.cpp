#include "eskin/nn/classifier.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "eskin/errors.hpp"

namespace eskin::nn {
namespace {

void check_labeled(std::span<const TactileWindow> set, const char* what) {
  if (set.empty()) throw InsufficientDataError(std::string(what) + " set is empty");
  for (const auto& w : set)
    if (!w.label || *w.label >= kClasses)
      throw std::invalid_argument(std::string(what) + " set has a missing or out-of-range label");
}

std::size_t argmax(std::span<const float> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::size_t worker_count(Exec exec) {
  return exec == Exec::parallel ? static_cast<std::size_t>(omp_get_max_threads()) : 1;
}

double accuracy_of(const CnnModel& model, std::span<const TactileWindow> set, Exec exec) {
  if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
  return evaluate(model, set, exec).accuracy;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
}

float fit_input_scale(std::span<const TactileWindow> windows) {
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& w : windows)
    for (float v : w.data) {
      sum_sq += static_cast<double>(v) * v;
      ++n;
    }
  const double rms = n == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(n));
  return rms > 0.0 ? static_cast<float>(1.0 / rms) : 1.0f;
}

TrainHistory train_network(CnnModel& model, std::span<const TactileWindow> train_set,
                           const TrainConfig& config, std::span<const TactileWindow> test_set,
                           const EpochCallback& on_epoch) {
  config.validate();
  check_labeled(train_set, "training");
  if (!test_set.empty()) check_labeled(test_set, "test");
  if (model.input_shape().size() != sensing::kWindowSize)
    throw std::invalid_argument("model input does not match the window shape");

  const std::size_t n = train_set.size();
  const std::size_t n_params = model.params().size();
  const std::size_t workers = worker_count(config.exec);
  std::vector<Workspace<float>> ws(workers, model.make_workspace());
  std::vector<std::vector<float>> sample_grad(config.batch_size, std::vector<float>(n_params));
  std::vector<double> sample_loss(config.batch_size);
  std::vector<float> batch_grad(n_params);
  std::vector<float> velocity(n_params, 0.0f);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(sensing::mix_seed(config.seed, 0x5EED));

  const auto lr = static_cast<float>(config.learning_rate);
  const auto mu = static_cast<float>(config.momentum);
  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), gen);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t bs = std::min(config.batch_size, n - start);
      auto one = [&](std::size_t b, Workspace<float>& w) {
        auto& g = sample_grad[b];
        std::fill(g.begin(), g.end(), 0.0f);
        const auto& win = train_set[order[start + b]];
        sample_loss[b] = model.loss_and_grad(win.data, *win.label, w, g);
      };
      if (config.exec == Exec::serial) {
        for (std::size_t b = 0; b < bs; ++b) one(b, ws[0]);
      } else {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(bs); ++b)
          one(static_cast<std::size_t>(b), ws[static_cast<std::size_t>(omp_get_thread_num())]);
      }

      // Fixed-order reduction keeps serial and parallel runs bit-identical.
      std::copy(sample_grad[0].begin(), sample_grad[0].end(), batch_grad.begin());
      double batch_loss = sample_loss[0];
      for (std::size_t b = 1; b < bs; ++b) {
        const auto& g = sample_grad[b];
        for (std::size_t i = 0; i < n_params; ++i) batch_grad[i] += g[i];
        batch_loss += sample_loss[b];
      }
      const float inv_bs = 1.0f / static_cast<float>(bs);
      auto& params = model.params();
      for (std::size_t i = 0; i < n_params; ++i) {
        velocity[i] = mu * velocity[i] + batch_grad[i] * inv_bs;
        params[i] -= lr * velocity[i];
      }
      loss_sum += batch_loss / static_cast<double>(bs);
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.train_accuracy = accuracy_of(model, train_set, config.exec);
    rec.test_accuracy = accuracy_of(model, test_set, config.exec);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

TrainResult train(std::span<const TactileWindow> train_set, const TrainConfig& config,
                  std::span<const TactileWindow> test_set, const EpochCallback& on_epoch) {
  check_labeled(train_set, "training");
  TrainResult r{CnnModel::tactile_cnn(), {}};
  r.model.init(config.seed);
  r.model.set_input_scale(fit_input_scale(train_set));
  r.history = train_network(r.model, train_set, config, test_set, on_epoch);
  return r;
}

std::array<double, kClasses> predict(const CnnModel& model, const TactileWindow& window) {
  if (model.classes() != kClasses) throw std::invalid_argument("model does not output 12 classes");
  auto ws = model.make_workspace();
  const auto p = model.forward(window.data, ws);
  std::array<double, kClasses> out{};
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

std::size_t predict_class(const CnnModel& model, const TactileWindow& window) {
  auto ws = model.make_workspace();
  return argmax(model.forward(window.data, ws));
}

Evaluation evaluate(const CnnModel& model, std::span<const TactileWindow> test_set, Exec exec) {
  check_labeled(test_set, "evaluation");
  std::vector<std::size_t> pred(test_set.size());
  const std::size_t workers = worker_count(exec);
  std::vector<Workspace<float>> ws(workers, model.make_workspace());
  const auto n = static_cast<std::ptrdiff_t>(test_set.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i)
      pred[static_cast<std::size_t>(i)] = argmax(model.forward(test_set[static_cast<std::size_t>(i)].data, ws[0]));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      auto& w = ws[static_cast<std::size_t>(omp_get_thread_num())];
      pred[static_cast<std::size_t>(i)] = argmax(model.forward(test_set[static_cast<std::size_t>(i)].data, w));
    }
  }
  Evaluation ev;
  ev.total = test_set.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const std::size_t truth = *test_set[i].label;
    ++ev.confusion[truth][pred[i]];
    if (truth == pred[i]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.total);
  return ev;
}

namespace {

// ReLU signs and pool winners for the last forward pass. Central differences
// are only valid when a perturbation leaves this pattern unchanged.
std::vector<std::uint32_t> kink_pattern(const Network<double>& model, const Workspace<double>& ws) {
  std::vector<std::uint32_t> out;
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& in = ws.acts[i];
    if (layers[i].kind == LayerKind::relu) {
      for (double v : in) out.push_back(v > 0.0 ? 1u : 0u);
    } else if (layers[i].kind == LayerKind::maxpool2) {
      const auto& l = layers[i];
      const std::size_t H = l.in.h, W = l.in.w;
      for (std::size_t c = 0; c < l.in.c; ++c)
        for (std::size_t y = 0; y < l.out.h; ++y)
          for (std::size_t x = 0; x < l.out.w; ++x) {
            const std::size_t base = c * H * W + 2 * y * W + 2 * x;
            std::uint32_t best = 0;
            const std::size_t offs[4] = {base, base + 1, base + W, base + W + 1};
            for (std::uint32_t k = 1; k < 4; ++k)
              if (in[offs[k]] > in[offs[best]]) best = k;
            out.push_back(best);
          }
    }
  }
  return out;
}

}  // namespace

GradCheckResult grad_check(const Network<double>& model, std::span<const float> input,
                           std::size_t label, double epsilon, std::size_t min_params,
                           std::uint64_t seed, double abs_floor) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  auto ws = model.make_workspace();
  std::vector<double> analytic(model.params().size(), 0.0);
  model.loss_and_grad(input, label, ws, analytic);
  const auto pattern = kink_pattern(model, ws);

  std::vector<const LayerSpec*> parametric;
  for (const auto& l : model.layers())
    if (l.param_count > 0) parametric.push_back(&l);
  if (parametric.empty()) return {};

  // Candidates per layer in seeded random order; each layer contributes an
  // equal share, the largest layer makes up any shortfall.
  std::mt19937_64 gen(seed);
  std::vector<std::vector<std::size_t>> queues;
  for (const auto* l : parametric) {
    std::vector<std::size_t> idx(l->param_count);
    std::iota(idx.begin(), idx.end(), l->param_offset);
    std::shuffle(idx.begin(), idx.end(), gen);
    queues.push_back(std::move(idx));
  }
  const std::size_t per_layer = (min_params + parametric.size() - 1) / parametric.size();
  const std::size_t biggest = static_cast<std::size_t>(
      std::max_element(parametric.begin(), parametric.end(),
                       [](auto* a, auto* b) { return a->param_count < b->param_count; }) -
      parametric.begin());

  Network<double> probe = model;
  GradCheckResult r;
  std::vector<std::size_t> used(parametric.size(), 0);
  std::vector<std::size_t> checked(parametric.size(), 0);
  auto try_one = [&](std::size_t layer) {
    const std::size_t i = queues[layer][used[layer]++];
    const double orig = probe.params()[i];
    probe.params()[i] = orig + epsilon;
    const double up = probe.loss(input, label, ws);
    const bool kink_up = kink_pattern(probe, ws) != pattern;
    probe.params()[i] = orig - epsilon;
    const double down = probe.loss(input, label, ws);
    const bool kink_down = kink_pattern(probe, ws) != pattern;
    probe.params()[i] = orig;
    if (kink_up || kink_down) {
      ++r.kinks_skipped;
      return;
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(a - numeric) / denom);
    ++r.params_checked;
    ++checked[layer];
  };
  for (std::size_t k = 0; k < parametric.size(); ++k)
    while (checked[k] < per_layer && used[k] < queues[k].size()) try_one(k);
  while (r.params_checked < min_params && used[biggest] < queues[biggest].size()) try_one(biggest);
  for (std::size_t k = 0; k < parametric.size(); ++k)
    if (checked[k] > 0) ++r.layers_covered;
  return r;
}

std::vector<double> embed_features(const CnnModel& model, std::span<const TactileWindow> windows,
                                   std::size_t& dim) {
  const auto& layers = model.layers();
  if (layers.size() < 2) throw std::invalid_argument("model too shallow for feature extraction");
  const std::size_t feature_layer = layers.size() - 2;
  dim = layers[feature_layer].out.size();
  std::vector<double> out(windows.size() * dim);
  auto ws = model.make_workspace();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    model.forward(windows[i].data, ws);
    const auto act = CnnModel::activation(ws, feature_layer);
    std::copy(act.begin(), act.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return out;
}

}  // namespace eskin::nn
