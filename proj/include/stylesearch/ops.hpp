#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stylesearch/tensor.hpp"

namespace stylesearch {

enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };
enum class Padding : std::uint8_t { same = 0, valid = 1 };
enum class LossKind : std::uint8_t { mse, categorical_cross_entropy };

// Probabilities are clamped to this floor before taking logs.
inline constexpr double kCrossEntropyEpsilon = 1e-12;

// Kernel weights are laid out [kernel_h][kernel_w][in_channels][out_channels].
// `same` padding pads with zeros, putting the odd extra row/column on the
// bottom/right; with stride s the output is ceil(in / s) per axis.
struct ConvGeometry {
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  Padding padding = Padding::same;

  std::size_t weight_count() const { return kernel_h * kernel_w * in_channels * out_channels; }
  Shape output_shape(const Shape& input) const;
};

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, std::span<const T> weights,
                      std::span<const T> bias, const ConvGeometry& geometry);

// Accumulates parameter gradients into grad_weights/grad_bias and returns the
// gradient with respect to the input.
template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, std::span<const T> weights,
                               const ConvGeometry& geometry, const BasicTensor<T>& grad_output,
                               std::span<T> grad_weights, std::span<T> grad_bias);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  // Flat input index of the winning element for each output element.
  std::vector<std::uint32_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t pool_h, std::size_t pool_w);

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_output,
                                  std::span<const std::uint32_t> argmax, const Shape& input_shape);

template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& input, std::size_t factor);

template <typename T>
BasicTensor<T> upsample_nearest_backward(const BasicTensor<T>& grad_output, std::size_t factor);

// output_j = sum_i input_i * weights[i][j] + bias_j, weights row-major [in][out].
template <typename T>
std::vector<T> dense(std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                     std::size_t in_size, std::size_t out_size);

template <typename T>
std::vector<T> dense_backward(std::span<const T> input, std::span<const T> weights,
                              std::size_t in_size, std::size_t out_size,
                              std::span<const T> grad_output, std::span<T> grad_weights,
                              std::span<T> grad_bias);

template <typename T>
void apply_activation(Activation kind, std::span<T> values);

// Turns d(loss)/d(output) into d(loss)/d(pre-activation) in place, using the
// activation's output values.
template <typename T>
void activation_backward(Activation kind, std::span<const T> output, std::span<T> grad);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
double loss(LossKind kind, std::span<const T> prediction, std::span<const T> target);

// d(mse)/d(prediction) = 2 (prediction - target) / n.
template <typename T>
std::vector<T> mse_gradient(std::span<const T> prediction, std::span<const T> target);

// Gradient of cross-entropy(softmax(logits), target) with respect to the
// logits, given the softmax probabilities.
template <typename T>
std::vector<T> softmax_cross_entropy_gradient(std::span<const T> probabilities,
                                              std::span<const T> target);

}  // namespace stylesearch
