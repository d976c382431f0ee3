#include "support/gradient_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "stylesearch/rng.hpp"

namespace testsupport {

using namespace stylesearch;

namespace {

// Everything that decides which branch a piecewise-linear layer takes.
struct BranchPattern {
  std::vector<std::vector<bool>> relu_active;
  std::vector<std::vector<std::uint32_t>> argmax;
  friend bool operator==(const BranchPattern&, const BranchPattern&) = default;
};

bool is_relu(const LayerSpec& spec) {
  if (const auto* c = std::get_if<layer::Conv>(&spec)) return c->activation == Activation::relu;
  if (const auto* d = std::get_if<layer::Dense>(&spec)) return d->activation == Activation::relu;
  return false;
}

BranchPattern pattern_of(const BasicNetwork<double>& net, const ActivationRecord<double>& rec) {
  BranchPattern p;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    std::vector<bool> active;
    if (is_relu(net.layers()[i])) {
      for (double v : rec.values[i + 1].values()) active.push_back(v > 0.0);
    }
    p.relu_active.push_back(std::move(active));
  }
  p.argmax = rec.pool_argmax;
  return p;
}

double loss_of_output(const BasicTensor<double>& out, const BasicTensor<double>& target,
                      LossKind kind) {
  if (kind == LossKind::mse) return loss<double>(LossKind::mse, out.values(), target.values());
  const auto probs = softmax<double>(out.values());
  return loss<double>(LossKind::categorical_cross_entropy, probs, target.values());
}

}  // namespace

double network_loss(const BasicNetwork<double>& net, const BasicTensor<double>& input,
                    const BasicTensor<double>& target, LossKind kind, std::uint64_t dropout_seed) {
  Rng rng(dropout_seed);
  const auto rec = forward(net, input, true, rng);
  return loss_of_output(rec.output(), target, kind);
}

GradientCheck check_gradients(BasicNetwork<double> net, const BasicTensor<double>& input,
                              const BasicTensor<double>& target, LossKind kind,
                              std::uint64_t dropout_seed, double step) {
  Rng rng(dropout_seed);
  const auto base = forward(net, input, true, rng);
  const BranchPattern base_pattern = pattern_of(net, base);
  std::vector<double> grad_out;
  if (kind == LossKind::mse) {
    grad_out = mse_gradient<double>(base.output().values(), target.values());
  } else {
    const auto probs = softmax<double>(base.output().values());
    grad_out = softmax_cross_entropy_gradient<double>(probs, target.values());
  }
  const auto analytic =
      backward(net, base, BasicTensor<double>(net.output_shape(), std::move(grad_out)));

  GradientCheck result;
  auto evaluate = [&](bool& kink) {
    Rng r(dropout_seed);
    const auto rec = forward(net, input, true, r);
    if (!(pattern_of(net, rec) == base_pattern)) kink = true;
    return loss_of_output(rec.output(), target, kind);
  };

  for (std::size_t layer = 0; layer < net.layer_count(); ++layer) {
    for (int which = 0; which < 2; ++which) {
      const std::size_t n = which == 0 ? net.parameters()[layer].weights.size()
                                       : net.parameters()[layer].bias.size();
      for (std::size_t i = 0; i < n; ++i) {
        auto slot = [&]() -> double& {
          auto& p = net.mutable_parameters()[layer];
          return which == 0 ? p.weights[i] : p.bias[i];
        };
        const double original = slot();
        bool kink = false;
        slot() = original + step;
        const double plus = evaluate(kink);
        slot() = original - step;
        const double minus = evaluate(kink);
        slot() = original;
        if (kink) {
          ++result.skipped_kinks;
          continue;
        }
        const double numeric = (plus - minus) / (2.0 * step);
        const double exact = which == 0 ? analytic[layer].weights[i] : analytic[layer].bias[i];
        const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-7});
        result.max_relative_error =
            std::max(result.max_relative_error, std::abs(numeric - exact) / denom);
        ++result.checked;
      }
    }
  }
  return result;
}

BasicTensor<double> random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  BasicTensor<double> t(shape);
  for (double& v : t.values()) v = uniform_real(rng, lo, hi);
  return t;
}

BasicNetwork<double> random_network_all_variants(std::uint64_t seed, std::size_t n_outputs) {
  Rng rng(derive_seed(seed, 17));
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(uniform_index(rng, n)); };
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::linear};

  const std::size_t side = 4 * (1 + pick(2));  // 4 or 8
  const std::size_t in_c = 1 + pick(3);
  const std::size_t c1 = 2 + pick(3);
  const std::size_t c2 = 2 + pick(2);
  const Shape input{side, side, in_c};

  std::vector<LayerSpec> layers;
  layers.push_back(layer::Conv{in_c, c1, 3, 3, 1, Padding::same, acts[pick(3)]});
  layers.push_back(layer::MaxPool{2, 2});
  layers.push_back(layer::UpsampleNearest{2});
  // Valid padding with an even or rectangular kernel and optional stride 2.
  const std::size_t kh = 2 + pick(2);
  const std::size_t kw = 2 + pick(2);
  layers.push_back(layer::Conv{c1, c2, kh, kw, 1 + pick(2), Padding::valid, acts[pick(3)]});
  layers.push_back(layer::Flatten{});
  BasicNetwork<double> probe(input, layers);
  const std::size_t flat = probe.output_shape().size();
  const std::size_t hidden = 3 + pick(4);
  layers.push_back(layer::Dense{flat, hidden, acts[pick(3)]});
  layers.push_back(layer::Dropout{0.25f});
  layers.push_back(layer::Dense{hidden, n_outputs, Activation::linear});

  BasicNetwork<double> net(input, std::move(layers));
  net.initialize(derive_seed(seed, 99));
  // Nonzero biases so relu/pool branches are not all decided at zero.
  auto& params = net.mutable_parameters();
  for (auto& p : params) {
    for (double& b : p.bias) b = uniform_real(rng, -0.1, 0.1);
  }
  return net;
}

}  // namespace testsupport
