#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>

#include "stylesearch/ops.hpp"

namespace stylesearch {
namespace layer {

struct Conv {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  Padding padding = Padding::same;
  Activation activation = Activation::relu;

  ConvGeometry geometry() const {
    return {kernel_h, kernel_w, in_channels, out_channels, stride, padding};
  }
  friend bool operator==(const Conv&, const Conv&) = default;
};

struct MaxPool {
  std::size_t pool_h = 2;
  std::size_t pool_w = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

struct UpsampleNearest {
  std::size_t factor = 2;
  friend bool operator==(const UpsampleNearest&, const UpsampleNearest&) = default;
};

// (h, w, c) -> (1, 1, h*w*c); Dense layers only accept vector-shaped input.
struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

struct Dense {
  std::size_t in_size = 1;
  std::size_t out_size = 1;
  Activation activation = Activation::linear;
  friend bool operator==(const Dense&, const Dense&) = default;
};

// Inverted dropout: survivors are scaled by 1 / (1 - rate) during training,
// inference is the identity.
struct Dropout {
  float rate = 0.5f;
  friend bool operator==(const Dropout&, const Dropout&) = default;
};

}  // namespace layer

using LayerSpec = std::variant<layer::Conv, layer::MaxPool, layer::UpsampleNearest, layer::Flatten,
                               layer::Dense, layer::Dropout>;

// Tag values are part of the weights file format.
enum class LayerTag : std::uint8_t {
  conv = 1,
  maxpool = 2,
  upsample = 3,
  flatten = 4,
  dense = 5,
  dropout = 6,
};

LayerTag tag_of(const LayerSpec& spec);

// Throws ContractError for zero counts or a dropout rate outside [0, 1).
void validate(const LayerSpec& spec);

Shape output_shape(const LayerSpec& spec, const Shape& input);

std::size_t weight_count(const LayerSpec& spec);
std::size_t bias_count(const LayerSpec& spec);

std::string describe(const LayerSpec& spec);
std::string to_string(Activation activation);

}  // namespace stylesearch
