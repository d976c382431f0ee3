#include "stylesearch/weights_io.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include "binary_io.hpp"

namespace stylesearch {
namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("failed reading '" + path + "'");
  }
  return bytes;
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  // Write to a sibling temp file and rename so readers never see a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace detail

namespace {

constexpr char kMagic[5] = "FNNW";

std::uint32_t narrow(std::size_t v) {
  if (v > 0xFFFFFFFFu) throw ShapeError("layer dimension does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

Activation read_activation(detail::ByteReader& r) {
  const auto at = r.offset();
  const auto v = r.u32("activation");
  if (v > static_cast<std::uint32_t>(Activation::sigmoid)) r.fail("unknown activation " + std::to_string(v), at);
  return static_cast<Activation>(v);
}

// Computed in floating point so corrupted dimensions cannot overflow.
double parameter_estimate(const LayerSpec& spec) {
  if (const auto* c = std::get_if<layer::Conv>(&spec)) {
    return static_cast<double>(c->kernel_h) * static_cast<double>(c->kernel_w) *
               static_cast<double>(c->in_channels) * static_cast<double>(c->out_channels) +
           static_cast<double>(c->out_channels);
  }
  if (const auto* d = std::get_if<layer::Dense>(&spec)) {
    return static_cast<double>(d->in_size) * static_cast<double>(d->out_size) +
           static_cast<double>(d->out_size);
  }
  return 0.0;
}

}  // namespace

std::vector<std::uint8_t> serialize_network(const Network& net) {
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kWeightsVersion);
  w.u32(narrow(net.layer_count()));
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& spec = net.layers()[i];
    w.u8(static_cast<std::uint8_t>(tag_of(spec)));
    switch (tag_of(spec)) {
      case LayerTag::conv: {
        const auto& c = std::get<layer::Conv>(spec);
        w.u32(narrow(c.in_channels));
        w.u32(narrow(c.out_channels));
        w.u32(narrow(c.kernel_h));
        w.u32(narrow(c.kernel_w));
        w.u32(narrow(c.stride));
        w.u32(static_cast<std::uint32_t>(c.padding));
        w.u32(static_cast<std::uint32_t>(c.activation));
        break;
      }
      case LayerTag::maxpool: {
        const auto& p = std::get<layer::MaxPool>(spec);
        w.u32(narrow(p.pool_h));
        w.u32(narrow(p.pool_w));
        break;
      }
      case LayerTag::upsample:
        w.u32(narrow(std::get<layer::UpsampleNearest>(spec).factor));
        break;
      case LayerTag::flatten:
        break;
      case LayerTag::dense: {
        const auto& d = std::get<layer::Dense>(spec);
        w.u32(narrow(d.in_size));
        w.u32(narrow(d.out_size));
        w.u32(static_cast<std::uint32_t>(d.activation));
        break;
      }
      case LayerTag::dropout:
        w.u32(std::bit_cast<std::uint32_t>(std::get<layer::Dropout>(spec).rate));
        break;
    }
    const auto& p = net.parameters()[i];
    w.u64(p.size());
    w.f32s(p.weights);
    w.f32s(p.bias);
  }
  return std::move(w.buffer());
}

Network deserialize_network(std::span<const std::uint8_t> bytes, std::optional<Shape> input_shape) {
  detail::ByteReader r(bytes, "FNNW weights");
  r.expect_magic(kMagic);
  const auto version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kWeightsVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const auto count = r.u32("layer count");

  std::vector<LayerSpec> layers;
  ParamSet<float> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag_at = r.offset();
    const auto tag = r.u8("layer tag");
    LayerSpec spec;
    switch (static_cast<LayerTag>(tag)) {
      case LayerTag::conv: {
        layer::Conv c;
        c.in_channels = r.u32("conv in_channels");
        c.out_channels = r.u32("conv out_channels");
        c.kernel_h = r.u32("conv kernel_h");
        c.kernel_w = r.u32("conv kernel_w");
        c.stride = r.u32("conv stride");
        const auto pad_at = r.offset();
        const auto pad = r.u32("conv padding");
        if (pad > static_cast<std::uint32_t>(Padding::valid)) r.fail("unknown padding mode", pad_at);
        c.padding = static_cast<Padding>(pad);
        c.activation = read_activation(r);
        spec = c;
        break;
      }
      case LayerTag::maxpool: {
        layer::MaxPool p;
        p.pool_h = r.u32("pool_h");
        p.pool_w = r.u32("pool_w");
        spec = p;
        break;
      }
      case LayerTag::upsample:
        spec = layer::UpsampleNearest{r.u32("upsample factor")};
        break;
      case LayerTag::flatten:
        spec = layer::Flatten{};
        break;
      case LayerTag::dense: {
        layer::Dense d;
        d.in_size = r.u32("dense in_size");
        d.out_size = r.u32("dense out_size");
        d.activation = read_activation(r);
        spec = d;
        break;
      }
      case LayerTag::dropout:
        spec = layer::Dropout{r.f32("dropout rate")};
        break;
      default:
        r.fail("unknown layer tag " + std::to_string(tag), tag_at);
    }
    try {
      validate(spec);
    } catch (const ContractError& e) {
      r.fail(std::string("invalid layer: ") + e.what(), tag_at);
    }
    const auto count_at = r.offset();
    const auto n_params = r.u64("parameter count");
    if (parameter_estimate(spec) > static_cast<double>(r.remaining()) / 4.0 + 1.0) {
      r.fail("layer " + std::to_string(i) + " needs more parameters than the file holds", count_at);
    }
    LayerParams<float> p;
    p.weights.resize(weight_count(spec));
    p.bias.resize(bias_count(spec));
    if (n_params != p.size()) {
      r.fail("layer " + std::to_string(i) + " declares " + std::to_string(n_params) +
                 " parameters, variant needs " + std::to_string(p.size()),
             count_at);
    }
    r.f32s(p.weights, "weights");
    r.f32s(p.bias, "biases");
    layers.push_back(spec);
    params.push_back(std::move(p));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last layer", r.offset());

  if (!input_shape) {
    if (layers.empty()) r.fail("cannot infer input shape of an empty network", r.offset());
    if (const auto* d = std::get_if<layer::Dense>(&layers.front())) {
      input_shape = Shape{1, 1, d->in_size};
    } else if (const auto* c = std::get_if<layer::Conv>(&layers.front())) {
      input_shape = Shape{64, 64, c->in_channels};
    } else {
      r.fail("cannot infer input shape; first layer is " + describe(layers.front()), 12);
    }
  }
  try {
    Network net(*input_shape, std::move(layers));
    net.set_parameters(std::move(params));
    return net;
  } catch (const ShapeError& e) {
    throw FormatError(std::string("FNNW weights: layers do not compose: ") + e.what(), 0);
  }
}

void save_network(const Network& net, const std::string& path) {
  detail::write_file_bytes(path, serialize_network(net));
}

Network load_network(const std::string& path, std::optional<Shape> input_shape) {
  const auto bytes = detail::read_file_bytes(path);
  return deserialize_network(bytes, input_shape);
}

}  // namespace stylesearch
