#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stylesearch/layers.hpp"
#include "stylesearch/rng.hpp"
#include "stylesearch/tensor.hpp"

namespace stylesearch {

template <typename T>
struct LayerParams {
  std::vector<T> weights;
  std::vector<T> bias;

  std::size_t size() const { return weights.size() + bias.size(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// One entry per layer; parameterless layers hold empty arrays.
template <typename T>
using ParamSet = std::vector<LayerParams<T>>;

// An ordered layer stack bound to a fixed input shape. Construction checks
// that every layer's output shape feeds the next one.
template <typename T>
class BasicNetwork {
 public:
  BasicNetwork() = default;
  BasicNetwork(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }
  // shapes()[i] is the input of layer i; shapes().back() is the output.
  const std::vector<Shape>& shapes() const { return shapes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }

  const ParamSet<T>& parameters() const { return params_; }
  // Any mutable access invalidates activation records from earlier forwards.
  ParamSet<T>& mutable_parameters();
  void set_parameters(ParamSet<T> params);
  std::uint64_t generation() const { return generation_; }
  std::size_t parameter_count() const;

  // He-uniform for relu layers, Glorot-uniform otherwise, zero biases.
  void initialize(std::uint64_t seed);

  // A zero-filled ParamSet shaped like this network's parameters.
  ParamSet<T> zero_like() const;

  template <typename U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out(input_shape(), layers_);
    ParamSet<U> params(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params[i].weights.assign(params_[i].weights.begin(), params_[i].weights.end());
      params[i].bias.assign(params_[i].bias.begin(), params_[i].bias.end());
    }
    out.set_parameters(std::move(params));
    return out;
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_{Shape{}};
  ParamSet<T> params_;
  std::uint64_t generation_ = 0;
};

using Network = BasicNetwork<float>;

// Everything backward() needs from a forward pass.
template <typename T>
struct ActivationRecord {
  // values[0] is the input, values[i + 1] the output of layer i.
  std::vector<BasicTensor<T>> values;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<std::vector<T>> dropout_scale;
  std::uint64_t generation = 0;

  const BasicTensor<T>& output() const { return values.back(); }
};

template <typename T>
ActivationRecord<T> forward(const BasicNetwork<T>& net, const BasicTensor<T>& input, bool training,
                            Rng& rng);

// Inference-mode output of the first `layer_count` layers.
template <typename T>
BasicTensor<T> forward_prefix(const BasicNetwork<T>& net, const BasicTensor<T>& input,
                              std::size_t layer_count);

template <typename T>
BasicTensor<T> infer(const BasicNetwork<T>& net, const BasicTensor<T>& input) {
  return forward_prefix(net, input, net.layer_count());
}

// Adds d(loss)/d(parameters) into `grads` and returns d(loss)/d(input).
// Throws ContractError when the record does not come from a forward pass of
// this network in its current state.
template <typename T>
BasicTensor<T> backward_accumulate(const BasicNetwork<T>& net, const ActivationRecord<T>& record,
                                   const BasicTensor<T>& grad_output, ParamSet<T>& grads);

template <typename T>
ParamSet<T> backward(const BasicNetwork<T>& net, const ActivationRecord<T>& record,
                     const BasicTensor<T>& grad_output) {
  ParamSet<T> grads = net.zero_like();
  backward_accumulate(net, record, grad_output, grads);
  return grads;
}

extern template class BasicNetwork<float>;
extern template class BasicNetwork<double>;

}  // namespace stylesearch
