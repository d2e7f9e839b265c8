#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eskin/nn/network.hpp"

namespace eskin::nn {

// "ESKM" | version u16 | input scale f32 | input c,h,w u16 | layer count u16 |
// per layer {kind u8, out c,h,w u16, kh u8, kw u8, param count u32} |
// param count u32 | float32 weights. Little-endian throughout.
std::vector<std::uint8_t> encode_checkpoint(const Network<float>& model);
Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Network<float>& model);
Network<float> load_checkpoint(const std::string& path);

}  // namespace eskin::nn
