#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/network.hpp"

namespace stylesearch {

// FNNW weights file, all integers little-endian:
//   "FNNW" | u32 version (1) | u32 layer count
//   per layer: u8 tag | u32 dims for the variant | u64 parameter count |
//              f32 weights then f32 biases
// Variant dims: Conv = in, out, kernel_h, kernel_w, stride, padding, activation;
// MaxPool = pool_h, pool_w; UpsampleNearest = factor; Flatten = none;
// Dense = in, out, activation; Dropout = rate as the bit pattern of an f32.
inline constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint8_t> serialize_network(const Network& net);

// The file does not record the input shape. When `input_shape` is empty it is
// inferred: (1, 1, in) for a leading Dense layer, 64 x 64 x in_channels for a
// leading Conv layer.
Network deserialize_network(std::span<const std::uint8_t> bytes,
                            std::optional<Shape> input_shape = std::nullopt);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path, std::optional<Shape> input_shape = std::nullopt);

}  // namespace stylesearch
