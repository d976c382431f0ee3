#include "stylesearch/optimizer.hpp"

#include <cmath>

namespace stylesearch {

OptimizerState OptimizerState::for_network(const Network& net, AdamHyper hyper) {
  OptimizerState state;
  state.first_moment = net.zero_like();
  state.second_moment = net.zero_like();
  state.hyper = hyper;
  return state;
}

void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m,
                 std::span<float> v, std::uint64_t step, const AdamHyper& hyper) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  if (step == 0) throw ContractError("adam_update: step is 1-based");
  const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  const auto b1 = static_cast<float>(hyper.beta1);
  const auto b2 = static_cast<float>(hyper.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    m[i] = b1 * m[i] + (1.0f - b1) * g;
    v[i] = b2 * v[i] + (1.0f - b2) * g * g;
    const double m_hat = static_cast<double>(m[i]) / correction1;
    const double v_hat = static_cast<double>(v[i]) / correction2;
    params[i] -= static_cast<float>(hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
  }
}

void adam_step(Network& net, const ParamSet<float>& grads, OptimizerState& state) {
  if (grads.size() != net.layer_count() || state.first_moment.size() != net.layer_count() ||
      state.second_moment.size() != net.layer_count()) {
    throw ShapeError("adam_step: gradient/state layer count does not match network");
  }
  ++state.step;
  auto& params = net.mutable_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(params[i].weights, grads[i].weights, state.first_moment[i].weights,
                state.second_moment[i].weights, state.step, state.hyper);
    adam_update(params[i].bias, grads[i].bias, state.first_moment[i].bias,
                state.second_moment[i].bias, state.step, state.hyper);
  }
}

}  // namespace stylesearch
