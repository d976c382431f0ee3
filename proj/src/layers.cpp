#include "stylesearch/layers.hpp"

#include <cmath>

namespace stylesearch {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive(std::size_t value, const char* what) {
  if (value == 0) throw ContractError(std::string(what) + " must be >= 1");
}

}  // namespace

LayerTag tag_of(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const layer::Conv&) { return LayerTag::conv; },
                        [](const layer::MaxPool&) { return LayerTag::maxpool; },
                        [](const layer::UpsampleNearest&) { return LayerTag::upsample; },
                        [](const layer::Flatten&) { return LayerTag::flatten; },
                        [](const layer::Dense&) { return LayerTag::dense; },
                        [](const layer::Dropout&) { return LayerTag::dropout; },
                    },
                    spec);
}

void validate(const LayerSpec& spec) {
  std::visit(Overloaded{
                 [](const layer::Conv& c) {
                   require_positive(c.in_channels, "conv in_channels");
                   require_positive(c.out_channels, "conv out_channels");
                   require_positive(c.kernel_h, "conv kernel_h");
                   require_positive(c.kernel_w, "conv kernel_w");
                   require_positive(c.stride, "conv stride");
                 },
                 [](const layer::MaxPool& p) {
                   require_positive(p.pool_h, "pool_h");
                   require_positive(p.pool_w, "pool_w");
                 },
                 [](const layer::UpsampleNearest& u) { require_positive(u.factor, "upsample factor"); },
                 [](const layer::Flatten&) {},
                 [](const layer::Dense& d) {
                   require_positive(d.in_size, "dense in_size");
                   require_positive(d.out_size, "dense out_size");
                 },
                 [](const layer::Dropout& d) {
                   if (!(d.rate >= 0.0f && d.rate < 1.0f)) {
                     throw ContractError("dropout rate must lie in [0, 1)");
                   }
                 },
             },
             spec);
}

Shape output_shape(const LayerSpec& spec, const Shape& in) {
  validate(spec);
  return std::visit(
      Overloaded{
          [&](const layer::Conv& c) { return c.geometry().output_shape(in); },
          [&](const layer::MaxPool& p) {
            if (in.height % p.pool_h != 0 || in.width % p.pool_w != 0) {
              throw ShapeError("maxpool: input " + in.to_string() + " not divisible by " +
                               std::to_string(p.pool_h) + "x" + std::to_string(p.pool_w));
            }
            return Shape{in.height / p.pool_h, in.width / p.pool_w, in.channels};
          },
          [&](const layer::UpsampleNearest& u) {
            return Shape{in.height * u.factor, in.width * u.factor, in.channels};
          },
          [&](const layer::Flatten&) { return Shape{1, 1, in.size()}; },
          [&](const layer::Dense& d) {
            if (in.height != 1 || in.width != 1 || in.channels != d.in_size) {
              throw ShapeError("dense: expects input (1, 1, " + std::to_string(d.in_size) +
                               "), got " + in.to_string());
            }
            return Shape{1, 1, d.out_size};
          },
          [&](const layer::Dropout&) { return in; },
      },
      spec);
}

std::size_t weight_count(const LayerSpec& spec) {
  if (const auto* c = std::get_if<layer::Conv>(&spec)) return c->geometry().weight_count();
  if (const auto* d = std::get_if<layer::Dense>(&spec)) return d->in_size * d->out_size;
  return 0;
}

std::size_t bias_count(const LayerSpec& spec) {
  if (const auto* c = std::get_if<layer::Conv>(&spec)) return c->out_channels;
  if (const auto* d = std::get_if<layer::Dense>(&spec)) return d->out_size;
  return 0;
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::linear:
      return "linear";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "unknown";
}

std::string describe(const LayerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const layer::Conv& c) {
            return "Conv(" + std::to_string(c.in_channels) + "->" + std::to_string(c.out_channels) +
                   ", " + std::to_string(c.kernel_h) + "x" + std::to_string(c.kernel_w) +
                   ", stride " + std::to_string(c.stride) + ", " +
                   (c.padding == Padding::same ? "same" : "valid") + ", " +
                   to_string(c.activation) + ")";
          },
          [](const layer::MaxPool& p) {
            return "MaxPool(" + std::to_string(p.pool_h) + "x" + std::to_string(p.pool_w) + ")";
          },
          [](const layer::UpsampleNearest& u) {
            return "UpsampleNearest(" + std::to_string(u.factor) + ")";
          },
          [](const layer::Flatten&) { return std::string("Flatten"); },
          [](const layer::Dense& d) {
            return "Dense(" + std::to_string(d.in_size) + "->" + std::to_string(d.out_size) + ", " +
                   to_string(d.activation) + ")";
          },
          [](const layer::Dropout& d) { return "Dropout(" + std::to_string(d.rate) + ")"; },
      },
      spec);
}

}  // namespace stylesearch
