#include "stylesearch/autoencoder.hpp"

#include <filesystem>

#include "stylesearch/errors.hpp"
#include "stylesearch/image_io.hpp"

namespace stylesearch {

std::vector<LayerSpec> standard_encoder() {
  using layer::Conv;
  return {Conv{3, 16}, layer::MaxPool{}, Conv{16, 16}, layer::MaxPool{},
          Conv{16, 8}, layer::MaxPool{}, Conv{8, 8}};
}

std::vector<LayerSpec> standard_decoder() {
  using layer::Conv;
  return {Conv{8, 8},   layer::UpsampleNearest{}, Conv{8, 16}, layer::UpsampleNearest{},
          Conv{16, 16}, layer::UpsampleNearest{},
          Conv{16, 3, 3, 3, 1, Padding::same, Activation::sigmoid}};
}

std::vector<LayerSpec> AutoencoderSpec::layers() const {
  std::vector<LayerSpec> all = encoder;
  all.insert(all.end(), decoder.begin(), decoder.end());
  return all;
}

Network build_autoencoder(const AutoencoderSpec& spec, std::uint64_t init_seed) {
  Network net(spec.input, spec.layers());
  if (net.output_shape() != spec.input) {
    throw ContractError("autoencoder output " + net.output_shape().to_string() +
                        " does not reproduce its input " + spec.input.to_string());
  }
  net.initialize(init_seed);
  return net;
}

namespace {

void check_image(const Network& net, const ImageTensor& image) {
  if (image.shape() != net.input_shape()) {
    throw ShapeError("expected image of shape " + net.input_shape().to_string() + ", got " +
                     image.shape().to_string());
  }
}

FitOptions fit_options(const TrainConfig& config) {
  FitOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.learning_rate = config.learning_rate;
  options.early_stop_patience = config.early_stop_patience;
  options.seed = config.shuffle_seed;
  options.loss = LossKind::mse;
  return options;
}

}  // namespace

TrainHistory train_autoencoder(Network& net, std::span<const ImageTensor> train,
                               std::span<const ImageTensor> val, const TrainConfig& config) {
  if (train.empty()) throw ContractError("train_autoencoder: empty training set");
  for (const auto& image : train) check_image(net, image);
  for (const auto& image : val) check_image(net, image);
  auto source = [](std::span<const ImageTensor> images) -> ExampleSource {
    return [images](std::size_t i, Rng*) { return Example{images[i], images[i]}; };
  };
  return fit(net, FitData{train.size(), source(train), val.size(), source(val)}, fit_options(config));
}

TrainHistory train_autoencoder(Network& net, std::size_t train_count, const ExampleSource& train,
                               std::size_t val_count, const ExampleSource& val,
                               const TrainConfig& config) {
  if (train_count == 0) throw ContractError("train_autoencoder: empty training set");
  return fit(net, FitData{train_count, train, val_count, val}, fit_options(config));
}

EmbeddingVector encode(const Network& net, const ImageTensor& image) {
  check_image(net, image);
  if (net.layer_count() < kEncoderLayers) throw ContractError("network too short to hold an encoder");
  return forward_prefix(net, image, kEncoderLayers).storage();
}

ImageTensor reconstruct(const Network& net, const ImageTensor& image) {
  check_image(net, image);
  return infer(net, image);
}

EmbeddingStore embed_catalog(const Network& net, const std::string& image_dir,
                             std::span<const std::uint64_t> ids) {
  const Shape in = net.input_shape();
  EmbeddingStore store;
  for (std::uint64_t id : ids) {
    const auto path = (std::filesystem::path(image_dir) / (std::to_string(id) + ".jpg")).string();
    store.add(id, encode(net, decode_image(path, in.height, in.width)));
  }
  return store;
}

}  // namespace stylesearch
