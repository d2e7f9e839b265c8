#include "eskin/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eskin::nn {
namespace {

template <typename T>
void conv_forward(const LayerSpec& l, std::span<const T> p, std::span<const T> in, std::span<T> out) {
  const std::size_t C = l.in.c, H = l.in.h, W = l.in.w, F = l.out.c;
  const std::size_t kh = l.kh, kw = l.kw;
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const T* weights = p.data();
  const T* bias = p.data() + F * C * kh * kw;
  for (std::size_t f = 0; f < F; ++f) {
    T* o = out.data() + f * H * W;
    std::fill(o, o + H * W, bias[f]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = in.data() + c * H * W;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T wv = weights[((f * C + c) * kh + ky) * kw + kx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
          const std::size_t x1 = static_cast<std::size_t>(
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dx));
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* srow = src + static_cast<std::size_t>(sy) * W;
            T* orow = o + y * W;
            for (std::size_t x = x0; x < x1; ++x)
              orow[x] += wv * srow[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx)];
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& l, std::span<const T> p, std::span<const T> in,
                   std::span<const T> gout, std::span<T> gin, std::span<T> gp) {
  const std::size_t C = l.in.c, H = l.in.h, W = l.in.w, F = l.out.c;
  const std::size_t kh = l.kh, kw = l.kw;
  const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(kh / 2);
  const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(kw / 2);
  const T* weights = p.data();
  T* gw = gp.data();
  T* gb = gp.data() + F * C * kh * kw;
  if (!gin.empty()) std::fill(gin.begin(), gin.end(), T(0));
  for (std::size_t f = 0; f < F; ++f) {
    const T* g = gout.data() + f * H * W;
    T bsum = 0;
    for (std::size_t i = 0; i < H * W; ++i) bsum += g[i];
    gb[f] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = in.data() + c * H * W;
      T* dst = gin.empty() ? nullptr : gin.data() + c * H * W;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::size_t widx = ((f * C + c) * kh + ky) * kw + kx;
          const T wv = weights[widx];
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
          const std::size_t x1 = static_cast<std::size_t>(
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dx));
          T acc = 0;
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* srow = src + static_cast<std::size_t>(sy) * W;
            const T* grow = g + y * W;
            T* drow = dst ? dst + static_cast<std::size_t>(sy) * W : nullptr;
            for (std::size_t x = x0; x < x1; ++x) {
              const std::size_t sx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx);
              acc += grow[x] * srow[sx];
              if (drow) drow[sx] += wv * grow[x];
            }
          }
          gw[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
void pool_forward(const LayerSpec& l, std::span<const T> in, std::span<T> out) {
  const std::size_t H = l.in.h, W = l.in.w, OH = l.out.h, OW = l.out.w;
  for (std::size_t c = 0; c < l.in.c; ++c)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t x = 0; x < OW; ++x) {
        const T* s = in.data() + c * H * W + 2 * y * W + 2 * x;
        out[(c * OH + y) * OW + x] = std::max(std::max(s[0], s[1]), std::max(s[W], s[W + 1]));
      }
}

template <typename T>
void pool_backward(const LayerSpec& l, std::span<const T> in, std::span<const T> gout, std::span<T> gin) {
  const std::size_t H = l.in.h, W = l.in.w, OH = l.out.h, OW = l.out.w;
  std::fill(gin.begin(), gin.end(), T(0));
  for (std::size_t c = 0; c < l.in.c; ++c)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t x = 0; x < OW; ++x) {
        const std::size_t base = c * H * W + 2 * y * W + 2 * x;
        // First maximum in scan order receives the gradient.
        std::size_t best = base;
        for (std::size_t off : {base + 1, base + W, base + W + 1})
          if (in[off] > in[best]) best = off;
        gin[best] += gout[(c * OH + y) * OW + x];
      }
}

template <typename T>
void dense_forward(const LayerSpec& l, std::span<const T> p, std::span<const T> in, std::span<T> out) {
  const std::size_t I = l.in.size(), O = l.out.size();
  const T* weights = p.data();
  const T* bias = p.data() + O * I;
  for (std::size_t j = 0; j < O; ++j) {
    const T* row = weights + j * I;
    T acc = 0;
    for (std::size_t i = 0; i < I; ++i) acc += row[i] * in[i];
    out[j] = acc + bias[j];
  }
}

template <typename T>
void dense_backward(const LayerSpec& l, std::span<const T> p, std::span<const T> in,
                    std::span<const T> gout, std::span<T> gin, std::span<T> gp) {
  const std::size_t I = l.in.size(), O = l.out.size();
  const T* weights = p.data();
  T* gw = gp.data();
  T* gb = gp.data() + O * I;
  if (!gin.empty()) std::fill(gin.begin(), gin.end(), T(0));
  for (std::size_t j = 0; j < O; ++j) {
    const T g = gout[j];
    gb[j] += g;
    if (g == T(0)) continue;
    T* gwr = gw + j * I;
    for (std::size_t i = 0; i < I; ++i) gwr[i] += g * in[i];
    if (!gin.empty()) {
      const T* row = weights + j * I;
      for (std::size_t i = 0; i < I; ++i) gin[i] += g * row[i];
    }
  }
}

}  // namespace

template <typename T>
void layer_forward(const LayerSpec& l, std::span<const T> params, std::span<const T> in,
                   std::span<T> out) {
  const auto p = params.subspan(l.param_offset, l.param_count);
  switch (l.kind) {
    case LayerKind::conv2d: conv_forward(l, p, in, out); break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case LayerKind::maxpool2: pool_forward(l, in, out); break;
    case LayerKind::dense: dense_forward(l, p, in, out); break;
  }
}

template <typename T>
void layer_backward(const LayerSpec& l, std::span<const T> params, std::span<const T> in,
                    std::span<const T> grad_out, std::span<T> grad_in, std::span<T> grad_params) {
  const auto p = params.subspan(l.param_offset, l.param_count);
  const auto gp = grad_params.empty() ? grad_params : grad_params.subspan(l.param_offset, l.param_count);
  switch (l.kind) {
    case LayerKind::conv2d: conv_backward(l, p, in, grad_out, grad_in, gp); break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > T(0) ? grad_out[i] : T(0);
      break;
    case LayerKind::maxpool2: pool_backward(l, in, grad_out, grad_in); break;
    case LayerKind::dense: dense_backward(l, p, in, grad_out, grad_in, gp); break;
  }
}

template <typename T>
void softmax(std::span<const T> logits, std::span<T> probs) {
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (auto& v : probs) v /= sum;
}

template <typename T>
Network<T> Network<T>::begin(Shape input) {
  Network n;
  n.input_ = input;
  return n;
}

template <typename T>
void Network<T>::push(LayerSpec spec) {
  spec.param_offset = params_.size();
  params_.resize(params_.size() + spec.param_count, T(0));
  layers_.push_back(spec);
}

template <typename T>
Network<T>& Network<T>::conv(std::size_t filters, std::size_t kh, std::size_t kw) {
  const Shape in = layers_.empty() ? input_ : layers_.back().out;
  if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("same padding needs odd kernels");
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in = in;
  s.out = {filters, in.h, in.w};
  s.kh = kh;
  s.kw = kw;
  s.param_count = filters * in.c * kh * kw + filters;
  push(s);
  return *this;
}

template <typename T>
Network<T>& Network<T>::relu() {
  const Shape in = layers_.empty() ? input_ : layers_.back().out;
  LayerSpec s;
  s.kind = LayerKind::relu;
  s.in = in;
  s.out = in;
  push(s);
  return *this;
}

template <typename T>
Network<T>& Network<T>::maxpool2() {
  const Shape in = layers_.empty() ? input_ : layers_.back().out;
  if (in.h < 2 || in.w < 2) throw std::invalid_argument("pooling needs at least 2x2 input");
  LayerSpec s;
  s.kind = LayerKind::maxpool2;
  s.in = in;
  s.out = {in.c, in.h / 2, in.w / 2};
  push(s);
  return *this;
}

template <typename T>
Network<T>& Network<T>::dense(std::size_t units) {
  const Shape in = layers_.empty() ? input_ : layers_.back().out;
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in = in;
  s.out = {units, 1, 1};
  s.param_count = units * in.size() + units;
  push(s);
  return *this;
}

template <typename T>
Network<T> Network<T>::tactile_cnn() {
  auto n = begin({1, 24, 60});
  n.conv(8, 3, 5).relu().maxpool2().conv(16, 3, 5).relu().maxpool2().dense(64).relu().dense(12);
  return n;
}

template <typename T>
Network<T> Network<T>::dense_only(std::size_t inputs, std::size_t hidden, std::size_t classes) {
  auto n = begin({inputs, 1, 1});
  n.dense(hidden).relu().dense(classes);
  return n;
}

template <typename T>
void Network<T>::init(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::fill(params_.begin(), params_.end(), T(0));
  for (const auto& l : layers_) {
    std::size_t fan_in = 0;
    std::size_t n_weights = 0;
    if (l.kind == LayerKind::conv2d) {
      fan_in = l.in.c * l.kh * l.kw;
      n_weights = l.out.c * fan_in;
    } else if (l.kind == LayerKind::dense) {
      fan_in = l.in.size();
      n_weights = l.out.size() * fan_in;
    } else {
      continue;
    }
    // He initialisation; biases start at zero.
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < n_weights; ++i)
      params_[l.param_offset + i] = static_cast<T>(stddev * gauss(gen));
  }
}

template <typename T>
Workspace<T> Network<T>::make_workspace() const {
  Workspace<T> ws;
  ws.acts.emplace_back(input_.size());
  ws.grads.emplace_back(input_.size());
  for (const auto& l : layers_) {
    ws.acts.emplace_back(l.out.size());
    ws.grads.emplace_back(l.out.size());
  }
  ws.probs.resize(classes());
  return ws;
}

template <typename T>
std::span<const T> Network<T>::forward(std::span<const float> input, Workspace<T>& ws) const {
  if (input.size() != input_.size()) throw std::invalid_argument("input shape mismatch");
  if (ws.acts.size() != layers_.size() + 1) ws = make_workspace();
  auto& x0 = ws.acts[0];
  for (std::size_t i = 0; i < input.size(); ++i) x0[i] = static_cast<T>(input[i]) * input_scale_;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layer_forward<T>(layers_[i], params_, ws.acts[i], ws.acts[i + 1]);
  softmax<T>(ws.acts.back(), ws.probs);
  return ws.probs;
}

template <typename T>
T Network<T>::loss(std::span<const float> input, std::size_t label, Workspace<T>& ws) const {
  forward(input, ws);
  const auto& z = ws.acts.back();
  const T mx = *std::max_element(z.begin(), z.end());
  T sum = 0;
  for (T v : z) sum += std::exp(v - mx);
  return std::log(sum) + mx - z[label];
}

template <typename T>
T Network<T>::loss_and_grad(std::span<const float> input, std::size_t label, Workspace<T>& ws,
                            std::span<T> grad) const {
  if (label >= classes()) throw std::invalid_argument("label out of range");
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const T l = loss(input, label, ws);
  auto& top = ws.grads.back();
  for (std::size_t k = 0; k < top.size(); ++k) top[k] = ws.probs[k] - (k == label ? T(1) : T(0));
  for (std::size_t i = layers_.size(); i-- > 0;) {
    // The input gradient of the first layer is never needed.
    std::span<T> gin = i == 0 ? std::span<T>{} : std::span<T>(ws.grads[i]);
    layer_backward<T>(layers_[i], params_, ws.acts[i], ws.grads[i + 1], gin, grad);
  }
  return l;
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> n;
  n.input_ = input_;
  n.layers_ = layers_;
  n.params_.assign(params_.begin(), params_.end());
  n.input_scale_ = static_cast<U>(input_scale_);
  return n;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;
template void softmax<float>(std::span<const float>, std::span<float>);
template void softmax<double>(std::span<const double>, std::span<double>);
template void layer_forward<float>(const LayerSpec&, std::span<const float>, std::span<const float>, std::span<float>);
template void layer_forward<double>(const LayerSpec&, std::span<const double>, std::span<const double>, std::span<double>);
template void layer_backward<float>(const LayerSpec&, std::span<const float>, std::span<const float>,
                                    std::span<const float>, std::span<float>, std::span<float>);
template void layer_backward<double>(const LayerSpec&, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>, std::span<double>);

}  // namespace eskin::nn
