#pragma once

#include <cstdint>
#include <span>

#include "stylesearch/network.hpp"

namespace stylesearch {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators mirror the network's parameter layout.
struct OptimizerState {
  ParamSet<float> first_moment;
  ParamSet<float> second_moment;
  std::uint64_t step = 0;
  AdamHyper hyper;

  static OptimizerState for_network(const Network& net, AdamHyper hyper = {});
};

// One bias-corrected Adam update over a flat parameter block. `step` is the
// 1-based index of this update.
void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m,
                 std::span<float> v, std::uint64_t step, const AdamHyper& hyper);

// Increments state.step, then updates every parameter of `net`.
void adam_step(Network& net, const ParamSet<float>& grads, OptimizerState& state);

}  // namespace stylesearch
