#include "eskin/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace eskin::nn {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'E', 'S', 'K', 'M'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("checkpoint: truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& model) {
  Writer w;
  w.bytes.assign(kMagic.begin(), kMagic.end());
  w.put<std::uint16_t>(kVersion);
  w.put_f32(model.input_scale());
  const Shape in = model.input_shape();
  w.put<std::uint16_t>(static_cast<std::uint16_t>(in.c));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(in.h));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(in.w));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(l.out.c));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(l.out.h));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(l.out.w));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kh));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kw));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.param_count));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.params().size()));
  for (float p : model.params()) w.put_f32(p);
  return std::move(w.bytes);
}

Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (auto m : kMagic)
    if (r.get<std::uint8_t>() != m) throw std::runtime_error("checkpoint: bad magic");
  if (r.get<std::uint16_t>() != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const float scale = r.get_f32();
  Shape in;
  in.c = r.get<std::uint16_t>();
  in.h = r.get<std::uint16_t>();
  in.w = r.get<std::uint16_t>();
  auto net = Network<float>::begin(in);
  const auto n_layers = r.get<std::uint16_t>();
  for (std::uint16_t i = 0; i < n_layers; ++i) {
    const auto kind = static_cast<LayerKind>(r.get<std::uint8_t>());
    Shape out;
    out.c = r.get<std::uint16_t>();
    out.h = r.get<std::uint16_t>();
    out.w = r.get<std::uint16_t>();
    const std::size_t kh = r.get<std::uint8_t>();
    const std::size_t kw = r.get<std::uint8_t>();
    const std::size_t count = r.get<std::uint32_t>();
    switch (kind) {
      case LayerKind::conv2d: net.conv(out.c, kh, kw); break;
      case LayerKind::relu: net.relu(); break;
      case LayerKind::maxpool2: net.maxpool2(); break;
      case LayerKind::dense: net.dense(out.c); break;
      default: throw std::runtime_error("checkpoint: unknown layer kind");
    }
    const auto& built = net.layers().back();
    if (built.out != out || built.param_count != count)
      throw std::runtime_error("checkpoint: inconsistent layer table");
  }
  if (r.get<std::uint32_t>() != net.params().size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto& p : net.params()) p = r.get_f32();
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  net.set_input_scale(scale);
  return net;
}

void save_checkpoint(const std::string& path, const Network<float>& model) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Network<float> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace eskin::nn
