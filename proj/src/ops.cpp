#include "stylesearch/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace stylesearch {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct PadOffsets {
  std::size_t top = 0;
  std::size_t left = 0;
};

PadOffsets pad_offsets(const ConvGeometry& g, const Shape& in, const Shape& out) {
  if (g.padding == Padding::valid) return {};
  const auto total = [&](std::size_t out_n, std::size_t k, std::size_t in_n) -> std::size_t {
    const std::size_t needed = (out_n - 1) * g.stride + k;
    return needed > in_n ? needed - in_n : 0;
  };
  return {total(out.height, g.kernel_h, in.height) / 2, total(out.width, g.kernel_w, in.width) / 2};
}

void check_geometry(const ConvGeometry& g) {
  if (g.kernel_h == 0 || g.kernel_w == 0 || g.in_channels == 0 || g.out_channels == 0) {
    throw ShapeError("convolution dimensions must be >= 1");
  }
  if (g.stride == 0) throw ContractError("convolution stride must be >= 1");
}

// Patch matrix: one row per output pixel, columns ordered (ky, kx, c) to match
// the kernel layout.
template <typename T>
RowMatrix<T> im2col(const BasicTensor<T>& input, const ConvGeometry& g, const Shape& out,
                    PadOffsets pad) {
  const std::size_t cols = g.kernel_h * g.kernel_w * g.in_channels;
  RowMatrix<T> patches = RowMatrix<T>::Zero(static_cast<Eigen::Index>(out.height * out.width),
                                            static_cast<Eigen::Index>(cols));
  const auto& in = input.shape();
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      T* row = patches.data() + (oy * out.width + ox) * cols;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                       static_cast<std::ptrdiff_t>(pad.top);
        if (y < 0 || y >= static_cast<std::ptrdiff_t>(in.height)) continue;
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                         static_cast<std::ptrdiff_t>(pad.left);
          if (x < 0 || x >= static_cast<std::ptrdiff_t>(in.width)) continue;
          const T* src = input.data() + input.index(static_cast<std::size_t>(y),
                                                    static_cast<std::size_t>(x), 0);
          std::copy(src, src + g.in_channels, row + (ky * g.kernel_w + kx) * g.in_channels);
        }
      }
    }
  }
  return patches;
}

template <typename T>
void col2im_add(const RowMatrix<T>& patches, const ConvGeometry& g, const Shape& out,
                PadOffsets pad, BasicTensor<T>& grad_input) {
  const std::size_t cols = g.kernel_h * g.kernel_w * g.in_channels;
  const auto& in = grad_input.shape();
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      const T* row = patches.data() + (oy * out.width + ox) * cols;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                       static_cast<std::ptrdiff_t>(pad.top);
        if (y < 0 || y >= static_cast<std::ptrdiff_t>(in.height)) continue;
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                         static_cast<std::ptrdiff_t>(pad.left);
          if (x < 0 || x >= static_cast<std::ptrdiff_t>(in.width)) continue;
          T* dst = grad_input.data() +
                   grad_input.index(static_cast<std::size_t>(y), static_cast<std::size_t>(x), 0);
          const T* src = row + (ky * g.kernel_w + kx) * g.in_channels;
          for (std::size_t c = 0; c < g.in_channels; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <typename T>
void check_conv_inputs(const BasicTensor<T>& input, std::span<const T> weights,
                       const ConvGeometry& g) {
  check_geometry(g);
  if (input.channels() != g.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.channels()) +
                     " channels, kernel expects " + std::to_string(g.in_channels));
  }
  if (weights.size() != g.weight_count()) {
    throw ShapeError("conv2d: expected " + std::to_string(g.weight_count()) + " weights, got " +
                     std::to_string(weights.size()));
  }
}

}  // namespace

Shape ConvGeometry::output_shape(const Shape& input) const {
  check_geometry(*this);
  if (input.channels != in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.channels) +
                     " channels, kernel expects " + std::to_string(in_channels));
  }
  if (padding == Padding::same) {
    if (input.height == 0 || input.width == 0) throw ShapeError("conv2d: empty input");
    return {(input.height + stride - 1) / stride, (input.width + stride - 1) / stride,
            out_channels};
  }
  if (kernel_h > input.height || kernel_w > input.width) {
    throw ShapeError("conv2d: kernel " + std::to_string(kernel_h) + "x" +
                     std::to_string(kernel_w) + " larger than input " + input.to_string());
  }
  return {(input.height - kernel_h) / stride + 1, (input.width - kernel_w) / stride + 1,
          out_channels};
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, std::span<const T> weights,
                      std::span<const T> bias, const ConvGeometry& g) {
  check_conv_inputs(input, weights, g);
  if (bias.size() != g.out_channels) throw ShapeError("conv2d: bias size must equal out_channels");
  const Shape out = g.output_shape(input.shape());
  const PadOffsets pad = pad_offsets(g, input.shape(), out);
  const RowMatrix<T> patches = im2col(input, g, out, pad);

  BasicTensor<T> output(out);
  MatrixMap<T> result(output.data(), static_cast<Eigen::Index>(out.height * out.width),
                      static_cast<Eigen::Index>(g.out_channels));
  ConstMatrixMap<T> kernel(weights.data(), static_cast<Eigen::Index>(patches.cols()),
                           static_cast<Eigen::Index>(g.out_channels));
  result.noalias() = patches * kernel;
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(),
                                                          static_cast<Eigen::Index>(bias.size()));
  result.rowwise() += b;
  return output;
}

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, std::span<const T> weights,
                               const ConvGeometry& g, const BasicTensor<T>& grad_output,
                               std::span<T> grad_weights, std::span<T> grad_bias) {
  check_conv_inputs(input, weights, g);
  const Shape out = g.output_shape(input.shape());
  if (grad_output.shape() != out) throw ShapeError("conv2d_backward: gradient shape mismatch");
  if (grad_weights.size() != weights.size() || grad_bias.size() != g.out_channels) {
    throw ShapeError("conv2d_backward: gradient buffer size mismatch");
  }
  const PadOffsets pad = pad_offsets(g, input.shape(), out);
  const RowMatrix<T> patches = im2col(input, g, out, pad);
  const auto rows = static_cast<Eigen::Index>(out.height * out.width);
  const auto cols = static_cast<Eigen::Index>(patches.cols());
  const auto outc = static_cast<Eigen::Index>(g.out_channels);

  ConstMatrixMap<T> gout(grad_output.data(), rows, outc);
  MatrixMap<T> gw(grad_weights.data(), cols, outc);
  gw.noalias() += patches.transpose() * gout;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grad_bias.data(), outc);
  gb += gout.colwise().sum();

  ConstMatrixMap<T> kernel(weights.data(), cols, outc);
  const RowMatrix<T> grad_patches = gout * kernel.transpose();
  BasicTensor<T> grad_input(input.shape());
  col2im_add(grad_patches, g, out, pad, grad_input);
  return grad_input;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t pool_h, std::size_t pool_w) {
  if (pool_h == 0 || pool_w == 0) throw ShapeError("maxpool2d: pool size must be >= 1");
  const Shape& in = input.shape();
  if (in.height % pool_h != 0 || in.width % pool_w != 0) {
    throw ShapeError("maxpool2d: input " + in.to_string() + " not divisible by pool " +
                     std::to_string(pool_h) + "x" + std::to_string(pool_w));
  }
  const Shape out{in.height / pool_h, in.width / pool_w, in.channels};
  PoolResult<T> result{BasicTensor<T>(out), std::vector<std::uint32_t>(out.size())};
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      for (std::size_t c = 0; c < out.channels; ++c) {
        std::size_t best = input.index(oy * pool_h, ox * pool_w, c);
        for (std::size_t py = 0; py < pool_h; ++py) {
          for (std::size_t px = 0; px < pool_w; ++px) {
            const std::size_t i = input.index(oy * pool_h + py, ox * pool_w + px, c);
            if (input[i] > input[best]) best = i;
          }
        }
        const std::size_t o = result.output.index(oy, ox, c);
        result.output[o] = input[best];
        result.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_output,
                                  std::span<const std::uint32_t> argmax,
                                  const Shape& input_shape) {
  if (argmax.size() != grad_output.size()) {
    throw ShapeError("maxpool2d_backward: argmax size does not match gradient");
  }
  BasicTensor<T> grad_input(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    if (argmax[o] >= grad_input.size()) throw ShapeError("maxpool2d_backward: argmax out of range");
    grad_input[argmax[o]] += grad_output[o];
  }
  return grad_input;
}

template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& input, std::size_t factor) {
  if (factor == 0) throw ContractError("upsample_nearest: factor must be >= 1");
  const Shape& in = input.shape();
  BasicTensor<T> output(Shape{in.height * factor, in.width * factor, in.channels});
  for (std::size_t y = 0; y < output.height(); ++y) {
    for (std::size_t x = 0; x < output.width(); ++x) {
      const T* src = input.data() + input.index(y / factor, x / factor, 0);
      std::copy(src, src + in.channels, output.data() + output.index(y, x, 0));
    }
  }
  return output;
}

template <typename T>
BasicTensor<T> upsample_nearest_backward(const BasicTensor<T>& grad_output, std::size_t factor) {
  if (factor == 0) throw ContractError("upsample_nearest: factor must be >= 1");
  const Shape& out = grad_output.shape();
  if (out.height % factor != 0 || out.width % factor != 0) {
    throw ShapeError("upsample_nearest_backward: gradient not divisible by factor");
  }
  BasicTensor<T> grad_input(Shape{out.height / factor, out.width / factor, out.channels});
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      T* dst = grad_input.data() + grad_input.index(y / factor, x / factor, 0);
      const T* src = grad_output.data() + grad_output.index(y, x, 0);
      for (std::size_t c = 0; c < out.channels; ++c) dst[c] += src[c];
    }
  }
  return grad_input;
}

template <typename T>
std::vector<T> dense(std::span<const T> input, std::span<const T> weights, std::span<const T> bias,
                     std::size_t in_size, std::size_t out_size) {
  if (input.size() != in_size) {
    throw ShapeError("dense: input length " + std::to_string(input.size()) + " != " +
                     std::to_string(in_size));
  }
  if (weights.size() != in_size * out_size || bias.size() != out_size) {
    throw ShapeError("dense: parameter sizes do not match " + std::to_string(in_size) + "x" +
                     std::to_string(out_size));
  }
  std::vector<T> output(bias.begin(), bias.end());
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> out(output.data(),
                                                      static_cast<Eigen::Index>(out_size));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> x(input.data(),
                                                          static_cast<Eigen::Index>(in_size));
  ConstMatrixMap<T> w(weights.data(), static_cast<Eigen::Index>(in_size),
                      static_cast<Eigen::Index>(out_size));
  out.noalias() += x * w;
  return output;
}

template <typename T>
std::vector<T> dense_backward(std::span<const T> input, std::span<const T> weights,
                              std::size_t in_size, std::size_t out_size,
                              std::span<const T> grad_output, std::span<T> grad_weights,
                              std::span<T> grad_bias) {
  if (input.size() != in_size || grad_output.size() != out_size ||
      weights.size() != in_size * out_size || grad_weights.size() != weights.size() ||
      grad_bias.size() != out_size) {
    throw ShapeError("dense_backward: size mismatch");
  }
  const auto n_in = static_cast<Eigen::Index>(in_size);
  const auto n_out = static_cast<Eigen::Index>(out_size);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(input.data(), n_in);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> g(grad_output.data(), n_out);
  MatrixMap<T> gw(grad_weights.data(), n_in, n_out);
  gw.noalias() += x * g;
  for (std::size_t j = 0; j < out_size; ++j) grad_bias[j] += grad_output[j];

  std::vector<T> grad_input(in_size);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gi(grad_input.data(), n_in);
  ConstMatrixMap<T> w(weights.data(), n_in, n_out);
  gi.noalias() = w * g.transpose();
  return grad_input;
}

template <typename T>
void apply_activation(Activation kind, std::span<T> values) {
  switch (kind) {
    case Activation::linear:
      return;
    case Activation::relu:
      for (T& v : values) v = v > T{0} ? v : T{0};
      return;
    case Activation::sigmoid:
      for (T& v : values) v = T{1} / (T{1} + std::exp(-v));
      return;
  }
}

template <typename T>
void activation_backward(Activation kind, std::span<const T> output, std::span<T> grad) {
  if (output.size() != grad.size()) throw ShapeError("activation_backward: size mismatch");
  switch (kind) {
    case Activation::linear:
      return;
    case Activation::relu:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(output[i] > T{0})) grad[i] = T{0};
      }
      return;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (T{1} - output[i]);
      return;
  }
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw ContractError("softmax: empty input");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = static_cast<T>(std::exp(static_cast<double>(logits[i]) - static_cast<double>(peak)));
    total += static_cast<double>(out[i]);
  }
  for (T& v : out) v = static_cast<T>(static_cast<double>(v) / total);
  return out;
}

template <typename T>
double loss(LossKind kind, std::span<const T> prediction, std::span<const T> target) {
  if (prediction.size() != target.size()) {
    throw ShapeError("loss: prediction has " + std::to_string(prediction.size()) +
                     " values, target has " + std::to_string(target.size()));
  }
  if (prediction.empty()) throw ShapeError("loss: empty input");
  double total = 0.0;
  if (kind == LossKind::mse) {
    for (std::size_t i = 0; i < prediction.size(); ++i) {
      const double d = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
      total += d * d;
    }
    return total / static_cast<double>(prediction.size());
  }
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    if (target[i] == T{0}) continue;
    const double p = std::max(static_cast<double>(prediction[i]), kCrossEntropyEpsilon);
    total -= static_cast<double>(target[i]) * std::log(p);
  }
  return total;
}

template <typename T>
std::vector<T> mse_gradient(std::span<const T> prediction, std::span<const T> target) {
  if (prediction.size() != target.size()) throw ShapeError("mse_gradient: size mismatch");
  std::vector<T> grad(prediction.size());
  const T scale = T{2} / static_cast<T>(prediction.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = scale * (prediction[i] - target[i]);
  return grad;
}

template <typename T>
std::vector<T> softmax_cross_entropy_gradient(std::span<const T> probabilities,
                                              std::span<const T> target) {
  if (probabilities.size() != target.size()) {
    throw ShapeError("softmax_cross_entropy_gradient: size mismatch");
  }
  std::vector<T> grad(probabilities.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = probabilities[i] - target[i];
  return grad;
}

#define STYLESEARCH_INSTANTIATE_OPS(T)                                                           \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, std::span<const T>, std::span<const T>,  \
                                 const ConvGeometry&);                                           \
  template BasicTensor<T> conv2d_backward(const BasicTensor<T>&, std::span<const T>,             \
                                          const ConvGeometry&, const BasicTensor<T>&,            \
                                          std::span<T>, std::span<T>);                           \
  template PoolResult<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);             \
  template BasicTensor<T> maxpool2d_backward(const BasicTensor<T>&,                              \
                                             std::span<const std::uint32_t>, const Shape&);      \
  template BasicTensor<T> upsample_nearest(const BasicTensor<T>&, std::size_t);                  \
  template BasicTensor<T> upsample_nearest_backward(const BasicTensor<T>&, std::size_t);         \
  template std::vector<T> dense(std::span<const T>, std::span<const T>, std::span<const T>,      \
                                std::size_t, std::size_t);                                       \
  template std::vector<T> dense_backward(std::span<const T>, std::span<const T>, std::size_t,    \
                                         std::size_t, std::span<const T>, std::span<T>,          \
                                         std::span<T>);                                          \
  template void apply_activation(Activation, std::span<T>);                                      \
  template void activation_backward(Activation, std::span<const T>, std::span<T>);               \
  template std::vector<T> softmax(std::span<const T>);                                           \
  template double loss(LossKind, std::span<const T>, std::span<const T>);                        \
  template std::vector<T> mse_gradient(std::span<const T>, std::span<const T>);                  \
  template std::vector<T> softmax_cross_entropy_gradient(std::span<const T>, std::span<const T>);

STYLESEARCH_INSTANTIATE_OPS(float)
STYLESEARCH_INSTANTIATE_OPS(double)

#undef STYLESEARCH_INSTANTIATE_OPS

}  // namespace stylesearch
