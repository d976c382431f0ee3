#include "stylesearch/network.hpp"

#include <atomic>
#include <cmath>

namespace stylesearch {
namespace {

std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

double init_limit(const LayerSpec& spec) {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  Activation activation = Activation::linear;
  if (const auto* c = std::get_if<layer::Conv>(&spec)) {
    fan_in = c->kernel_h * c->kernel_w * c->in_channels;
    fan_out = c->kernel_h * c->kernel_w * c->out_channels;
    activation = c->activation;
  } else if (const auto* d = std::get_if<layer::Dense>(&spec)) {
    fan_in = d->in_size;
    fan_out = d->out_size;
    activation = d->activation;
  }
  if (activation == Activation::relu) return std::sqrt(6.0 / static_cast<double>(fan_in));
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

template <typename T>
BasicNetwork<T>::BasicNetwork(Shape input_shape, std::vector<LayerSpec> layers)
    : layers_(std::move(layers)), generation_(next_generation()) {
  if (input_shape.size() == 0) throw ShapeError("network input shape must be non-empty");
  shapes_.assign(1, input_shape);
  shapes_.reserve(layers_.size() + 1);
  params_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shapes_.push_back(stylesearch::output_shape(layers_[i], shapes_.back()));
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + describe(layers_[i]) +
                       "): " + e.what());
    }
    params_[i].weights.assign(weight_count(layers_[i]), T{0});
    params_[i].bias.assign(bias_count(layers_[i]), T{0});
  }
}

template <typename T>
ParamSet<T>& BasicNetwork<T>::mutable_parameters() {
  generation_ = next_generation();
  return params_;
}

template <typename T>
void BasicNetwork<T>::set_parameters(ParamSet<T> params) {
  if (params.size() != layers_.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.size()) + " layers, network has " +
                     std::to_string(layers_.size()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (params[i].weights.size() != weight_count(layers_[i]) ||
        params[i].bias.size() != bias_count(layers_[i])) {
      throw ShapeError("parameter sizes for layer " + std::to_string(i) + " (" +
                       describe(layers_[i]) + ") do not match");
    }
  }
  params_ = std::move(params);
  generation_ = next_generation();
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
void BasicNetwork<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& p = params_[i];
    if (p.weights.empty()) continue;
    const double limit = init_limit(layers_[i]);
    for (T& w : p.weights) w = static_cast<T>(uniform_real(rng, -limit, limit));
    std::fill(p.bias.begin(), p.bias.end(), T{0});
  }
  generation_ = next_generation();
}

template <typename T>
ParamSet<T> BasicNetwork<T>::zero_like() const {
  ParamSet<T> out(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out[i].weights.assign(params_[i].weights.size(), T{0});
    out[i].bias.assign(params_[i].bias.size(), T{0});
  }
  return out;
}

namespace {

template <typename T>
BasicTensor<T> apply_layer(const LayerSpec& spec, const LayerParams<T>& params,
                           const BasicTensor<T>& input, const Shape& out_shape, bool training,
                           Rng* rng, std::vector<std::uint32_t>* argmax,
                           std::vector<T>* dropout_scale) {
  switch (tag_of(spec)) {
    case LayerTag::conv: {
      const auto& c = std::get<layer::Conv>(spec);
      auto out = conv2d<T>(input, params.weights, params.bias, c.geometry());
      apply_activation<T>(c.activation, out.values());
      return out;
    }
    case LayerTag::maxpool: {
      const auto& p = std::get<layer::MaxPool>(spec);
      auto pooled = maxpool2d(input, p.pool_h, p.pool_w);
      if (argmax) *argmax = std::move(pooled.argmax);
      return std::move(pooled.output);
    }
    case LayerTag::upsample:
      return upsample_nearest(input, std::get<layer::UpsampleNearest>(spec).factor);
    case LayerTag::flatten:
      return input.reshaped(out_shape);
    case LayerTag::dense: {
      const auto& d = std::get<layer::Dense>(spec);
      auto out = dense<T>(input.values(), params.weights, params.bias, d.in_size, d.out_size);
      apply_activation<T>(d.activation, out);
      return BasicTensor<T>(out_shape, std::move(out));
    }
    case LayerTag::dropout: {
      if (!training) return input;
      const double rate = std::get<layer::Dropout>(spec).rate;
      const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
      std::vector<T> scale(input.size());
      for (T& s : scale) s = unit_real(*rng) >= rate ? keep_scale : T{0};
      BasicTensor<T> out = input;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale[i];
      if (dropout_scale) *dropout_scale = std::move(scale);
      return out;
    }
  }
  throw ContractError("unknown layer variant");
}

template <typename T>
void check_input(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
  if (input.shape() != net.input_shape()) {
    throw ShapeError("network expects input " + net.input_shape().to_string() + ", got " +
                     input.shape().to_string());
  }
}

}  // namespace

template <typename T>
ActivationRecord<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& input, bool training,
                            Rng& rng) {
  check_input(net, input);
  const auto& layers = net.layers();
  ActivationRecord<T> record;
  record.generation = net.generation();
  record.values.reserve(layers.size() + 1);
  record.values.push_back(input);
  record.pool_argmax.resize(layers.size());
  record.dropout_scale.resize(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    record.values.push_back(apply_layer(layers[i], net.parameters()[i], record.values.back(),
                                        net.shapes()[i + 1], training, &rng,
                                        &record.pool_argmax[i], &record.dropout_scale[i]));
  }
  return record;
}

template <typename T>
BasicTensor<T> forward_prefix(const BasicNetwork<T>& net, const BasicTensor<T>& input,
                              std::size_t layer_count) {
  check_input(net, input);
  if (layer_count > net.layer_count()) {
    throw ContractError("forward_prefix: network has only " + std::to_string(net.layer_count()) +
                        " layers");
  }
  BasicTensor<T> current = input;
  for (std::size_t i = 0; i < layer_count; ++i) {
    current = apply_layer(net.layers()[i], net.parameters()[i], current, net.shapes()[i + 1], false,
                          static_cast<Rng*>(nullptr), nullptr, static_cast<std::vector<T>*>(nullptr));
  }
  return current;
}

template <typename T>
BasicTensor<T> backward_accumulate(const BasicNetwork<T>& net, const ActivationRecord<T>& record,
                                   const BasicTensor<T>& grad_output, ParamSet<T>& grads) {
  const auto& layers = net.layers();
  if (record.generation != net.generation() || record.values.size() != layers.size() + 1 ||
      record.pool_argmax.size() != layers.size() || record.dropout_scale.size() != layers.size()) {
    throw ContractError("backward: activation record does not match the network's current state");
  }
  for (std::size_t i = 0; i < record.values.size(); ++i) {
    if (record.values[i].shape() != net.shapes()[i]) {
      throw ContractError("backward: activation record shape mismatch at position " +
                          std::to_string(i));
    }
  }
  if (grad_output.shape() != net.output_shape()) {
    throw ShapeError("backward: loss gradient shape " + grad_output.shape().to_string() +
                     " != network output " + net.output_shape().to_string());
  }
  if (grads.size() != layers.size()) throw ShapeError("backward: gradient set size mismatch");

  BasicTensor<T> grad = grad_output;
  for (std::size_t idx = layers.size(); idx-- > 0;) {
    const auto& spec = layers[idx];
    const auto& params = net.parameters()[idx];
    const auto& in = record.values[idx];
    const auto& out = record.values[idx + 1];
    switch (tag_of(spec)) {
      case LayerTag::conv: {
        const auto& c = std::get<layer::Conv>(spec);
        activation_backward<T>(c.activation, out.values(), grad.values());
        grad = conv2d_backward<T>(in, params.weights, c.geometry(), grad, grads[idx].weights,
                                  grads[idx].bias);
        break;
      }
      case LayerTag::maxpool:
        grad = maxpool2d_backward<T>(grad, record.pool_argmax[idx], in.shape());
        break;
      case LayerTag::upsample:
        grad = upsample_nearest_backward(grad, std::get<layer::UpsampleNearest>(spec).factor);
        break;
      case LayerTag::flatten:
        grad = grad.reshaped(in.shape());
        break;
      case LayerTag::dense: {
        const auto& d = std::get<layer::Dense>(spec);
        activation_backward<T>(d.activation, out.values(), grad.values());
        auto gi = dense_backward<T>(in.values(), params.weights, d.in_size, d.out_size,
                                    grad.values(), grads[idx].weights, grads[idx].bias);
        grad = BasicTensor<T>(in.shape(), std::move(gi));
        break;
      }
      case LayerTag::dropout: {
        const auto& scale = record.dropout_scale[idx];
        if (scale.empty()) break;  // inference-mode record
        if (scale.size() != grad.size()) throw ContractError("backward: dropout mask mismatch");
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= scale[i];
        break;
      }
    }
  }
  return grad;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

#define STYLESEARCH_INSTANTIATE_NETWORK(T)                                                      \
  template ActivationRecord<T> forward(const BasicNetwork<T>&, const BasicTensor<T>&, bool,     \
                                       Rng&);                                                   \
  template BasicTensor<T> forward_prefix(const BasicNetwork<T>&, const BasicTensor<T>&,         \
                                         std::size_t);                                          \
  template BasicTensor<T> backward_accumulate(const BasicNetwork<T>&, const ActivationRecord<T>&, \
                                              const BasicTensor<T>&, ParamSet<T>&);

STYLESEARCH_INSTANTIATE_NETWORK(float)
STYLESEARCH_INSTANTIATE_NETWORK(double)

#undef STYLESEARCH_INSTANTIATE_NETWORK

}  // namespace stylesearch
