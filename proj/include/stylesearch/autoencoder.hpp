#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/embedding_store.hpp"
#include "stylesearch/layers.hpp"
#include "stylesearch/network.hpp"
#include "stylesearch/training.hpp"

namespace stylesearch {

inline constexpr std::size_t kEncoderLayers = 7;
inline constexpr std::size_t kEmbeddingDim = 512;

using EmbeddingVector = std::vector<float>;

std::vector<LayerSpec> standard_encoder();
std::vector<LayerSpec> standard_decoder();

// Defaults to conv 16/16/8/8 with 2x2 pooling down to 8x8x8, mirrored with
// nearest upsampling and a sigmoid output.
struct AutoencoderSpec {
  Shape input{64, 64, 3};
  std::vector<LayerSpec> encoder = standard_encoder();
  std::vector<LayerSpec> decoder = standard_decoder();

  static AutoencoderSpec standard() { return {}; }
  std::vector<LayerSpec> layers() const;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  // 0 disables early stopping.
  std::size_t early_stop_patience = 5;
  std::uint64_t shuffle_seed = 42;
};

Network build_autoencoder(const AutoencoderSpec& spec = AutoencoderSpec::standard(),
                          std::uint64_t init_seed = 0);

// Self-supervised mse training (target = input). Throws ContractError on an
// empty training set and ShapeError on images of the wrong shape.
TrainHistory train_autoencoder(Network& net, std::span<const ImageTensor> train,
                               std::span<const ImageTensor> val, const TrainConfig& config);

// Same, with images fetched on demand (e.g. decoded from disk).
TrainHistory train_autoencoder(Network& net, std::size_t train_count, const ExampleSource& train,
                               std::size_t val_count, const ExampleSource& val,
                               const TrainConfig& config);

// Flattened output of the first kEncoderLayers layers.
EmbeddingVector encode(const Network& net, const ImageTensor& image);
ImageTensor reconstruct(const Network& net, const ImageTensor& image);

// Encodes image_dir/{id}.jpg for every id, in order. Throws DecodeError for
// a missing or unreadable image.
EmbeddingStore embed_catalog(const Network& net, const std::string& image_dir,
                             std::span<const std::uint64_t> ids);

}  // namespace stylesearch
