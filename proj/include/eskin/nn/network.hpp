#pragma once

// Small sequential network (conv / relu / max-pool / dense) with hand-written
// backpropagation. Parameters live in one flat vector; layers are described by
// plain specs so a model converts between float and double without loss of
// structure.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace eskin::nn {

struct Shape {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;
  std::size_t size() const { return c * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class LayerKind : std::uint8_t { conv2d = 1, relu = 2, maxpool2 = 3, dense = 4 };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Shape in;
  Shape out;
  std::size_t kh = 0;  // conv kernel height
  std::size_t kw = 0;  // conv kernel width
  std::size_t param_offset = 0;
  std::size_t param_count = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Per-sample activation buffers; one per concurrent worker.
template <typename T>
struct Workspace {
  std::vector<std::vector<T>> acts;   // acts[0] = scaled input, acts[i+1] = layer i output
  std::vector<std::vector<T>> grads;  // gradient w.r.t. acts[i]
  std::vector<T> probs;
};

template <typename T>
class Network {
 public:
  Network() = default;

  // Builders. Input shapes are (channels, height, width).
  Network& conv(std::size_t filters, std::size_t kh, std::size_t kw);
  Network& relu();
  Network& maxpool2();
  Network& dense(std::size_t units);

  static Network begin(Shape input);
  // 1x24x60 -> conv(8,3x5) relu pool -> conv(16,3x5) relu pool -> 64 relu -> 12.
  static Network tactile_cnn();
  static Network dense_only(std::size_t inputs, std::size_t hidden, std::size_t classes);

  void init(std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const { return input_; }
  std::size_t classes() const { return layers_.empty() ? input_.size() : layers_.back().out.size(); }

  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  // Multiplier applied to raw inputs before the first layer.
  T input_scale() const { return input_scale_; }
  void set_input_scale(T s) { input_scale_ = s; }

  Workspace<T> make_workspace() const;

  // Softmax probabilities; also leaves every activation in ws.
  std::span<const T> forward(std::span<const float> input, Workspace<T>& ws) const;

  // Cross-entropy loss of one sample; accumulates dLoss/dparams into grad.
  T loss_and_grad(std::span<const float> input, std::size_t label, Workspace<T>& ws,
                  std::span<T> grad) const;
  T loss(std::span<const float> input, std::size_t label, Workspace<T>& ws) const;

  // Activations of layer `index` output (valid after forward).
  static std::span<const T> activation(const Workspace<T>& ws, std::size_t index) {
    return ws.acts[index + 1];
  }

  template <typename U>
  Network<U> cast() const;

 private:
  template <typename U>
  friend class Network;

  void push(LayerSpec spec);

  Shape input_{};
  std::vector<LayerSpec> layers_;
  std::vector<T> params_;
  T input_scale_ = T(1);
};

// Forward/backward for one layer, exposed for tests.
template <typename T>
void layer_forward(const LayerSpec& l, std::span<const T> params, std::span<const T> in,
                   std::span<T> out);
template <typename T>
void layer_backward(const LayerSpec& l, std::span<const T> params, std::span<const T> in,
                    std::span<const T> grad_out, std::span<T> grad_in, std::span<T> grad_params);

template <typename T>
void softmax(std::span<const T> logits, std::span<T> probs);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace eskin::nn
