#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/augment.hpp"
#include "stylesearch/embedding_store.hpp"
#include "stylesearch/layers.hpp"
#include "stylesearch/manifest.hpp"
#include "stylesearch/network.hpp"
#include "stylesearch/training.hpp"

namespace stylesearch {

enum class ClassifierMode { scratch_cnn, embedding_head };

ClassifierMode parse_classifier_mode(const std::string& name);
std::string to_string(ClassifierMode mode);

struct ClassifierSpec {
  ClassifierMode mode = ClassifierMode::scratch_cnn;
  std::size_t n_classes = 2;
  // Input length for embedding_head.
  std::size_t input_dim = 512;
  Shape image{64, 64, 3};
  std::size_t hidden = 256;
  float dropout = 0.5f;

  // Network output is the logits; softmax is applied by predict and the
  // cross-entropy loss.
  std::vector<LayerSpec> layers() const;
  Shape input_shape() const;
};

struct FitConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t early_stop_patience = 5;
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  // Training-split items only; nullopt disables augmentation.
  std::optional<AugmentConfig> augment = AugmentConfig{};
  std::uint64_t seed = 42;
};

// Probabilities in class-vocabulary order.
using ClassProbabilities = std::vector<double>;

// Throws ContractError when n_classes < 2.
Network build_classifier(const ClassifierSpec& spec, std::uint64_t seed = 0);

// Dense first layer means embedding_head, convolution means scratch_cnn.
ClassifierMode detect_mode(const Network& net);

// Softmax of the network output. Inputs of the right element count are
// reshaped (so a flat embedding works for a head); otherwise ShapeError.
ClassProbabilities predict(const Network& net, const Tensor& input);
std::size_t argmax(const ClassProbabilities& probabilities);

struct LabeledSet {
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;
};

// In-memory training; labels index the n_classes outputs. Augmentation only
// applies to image inputs (height and width > 1).
TrainHistory train_classifier(Network& net, const LabeledSet& train, const LabeledSet& val,
                              const FitConfig& config);

// Trains a scratch CNN on the manifest's train split, monitoring the
// validation split. Images are decoded from the manifest's image_dir.
// Throws ContractError when either split is empty.
TrainHistory train_classifier(Network& net, const DatasetManifest& manifest, const FitConfig& config,
                              const std::function<void(std::size_t, const TrainHistory&)>& on_epoch = {});

struct HeadTraining {
  Network net;
  TrainHistory history;
};

// Joins embeddings to the manifest by id (extra ids ignored) and trains a
// fresh head on the train split. Throws LookupError naming the first
// manifest id without an embedding and FormatError when the store dimension
// differs from expected_dim.
HeadTraining train_embedding_head(const EmbeddingStore& embeddings, const DatasetManifest& manifest,
                                  const FitConfig& config,
                                  std::optional<std::size_t> expected_dim = std::nullopt);
HeadTraining train_embedding_head(const std::string& embedding_file, const DatasetManifest& manifest,
                                  const FitConfig& config,
                                  std::optional<std::size_t> expected_dim = std::nullopt);

// Inputs and labels for one manifest split, read from an embedding store.
LabeledSet embedding_split(const EmbeddingStore& embeddings, const DatasetManifest& manifest,
                           std::span<const std::uint64_t> ids);

struct SplitPredictions {
  std::vector<std::uint64_t> ids;
  std::vector<std::size_t> truth;
  std::vector<ClassProbabilities> probabilities;
};

// Runs the classifier over manifest ids. Scratch networks read images from
// disk; heads read the given embedding store (LookupError if missing).
SplitPredictions predict_split(const Network& net, const DatasetManifest& manifest,
                               std::span<const std::uint64_t> ids,
                               const EmbeddingStore* embeddings = nullptr);

}  // namespace stylesearch
