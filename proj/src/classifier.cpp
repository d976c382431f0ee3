#include "stylesearch/classifier.hpp"

#include <algorithm>
#include <cctype>

#include "stylesearch/errors.hpp"
#include "stylesearch/image_io.hpp"
#include "stylesearch/ops.hpp"

namespace stylesearch {
namespace {

Tensor one_hot(std::size_t label, std::size_t n) {
  Tensor t(Shape{1, 1, n});
  t[label] = 1.0f;
  return t;
}

FitOptions fit_options(const FitConfig& config) {
  FitOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.batch_size;
  options.learning_rate = config.learning_rate;
  options.early_stop_patience = config.early_stop_patience;
  options.plateau_patience = config.plateau_patience;
  options.plateau_factor = config.plateau_factor;
  options.min_lr = config.min_lr;
  options.seed = config.seed;
  options.loss = LossKind::categorical_cross_entropy;
  return options;
}

void check_labels(const LabeledSet& set, std::size_t n_classes, const char* which) {
  if (set.inputs.size() != set.labels.size()) {
    throw ContractError(std::string(which) + ": inputs and labels differ in length");
  }
  for (std::size_t label : set.labels) {
    if (label >= n_classes) {
      throw ContractError(std::string(which) + ": label " + std::to_string(label) + " outside " +
                          std::to_string(n_classes) + " classes");
    }
  }
}

Tensor fit_input(const Network& net, const Tensor& input) {
  if (input.shape() == net.input_shape()) return input;
  if (input.size() == net.input_shape().size() && net.input_shape().height == 1 &&
      net.input_shape().width == 1) {
    return input.reshaped(net.input_shape());
  }
  throw ShapeError("classifier expects input " + net.input_shape().to_string() + ", got " +
                   input.shape().to_string());
}

}  // namespace

ClassifierMode parse_classifier_mode(const std::string& name) {
  std::string key;
  for (char c : name) key.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key == "scratch" || key == "scratch_cnn") return ClassifierMode::scratch_cnn;
  if (key == "head" || key == "embedding_head") return ClassifierMode::embedding_head;
  throw ContractError("unknown classifier mode '" + name + "' (expected scratch or head)");
}

std::string to_string(ClassifierMode mode) {
  return mode == ClassifierMode::scratch_cnn ? "scratch" : "head";
}

std::vector<LayerSpec> ClassifierSpec::layers() const {
  using layer::Conv;
  std::vector<LayerSpec> out;
  std::size_t flat = input_dim;
  if (mode == ClassifierMode::scratch_cnn) {
    out = {Conv{image.channels, 16}, layer::MaxPool{}, Conv{16, 32}, layer::MaxPool{},
           Conv{32, 32},             layer::MaxPool{}, layer::Flatten{}};
    flat = (image.height / 8) * (image.width / 8) * 32;
  }
  out.push_back(layer::Dense{flat, hidden, Activation::relu});
  out.push_back(layer::Dropout{dropout});
  out.push_back(layer::Dense{hidden, n_classes, Activation::linear});
  return out;
}

Shape ClassifierSpec::input_shape() const {
  return mode == ClassifierMode::scratch_cnn ? image : Shape{1, 1, input_dim};
}

Network build_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
  if (spec.n_classes < 2) {
    throw ContractError("a classifier needs at least 2 classes, got " + std::to_string(spec.n_classes));
  }
  Network net(spec.input_shape(), spec.layers());
  net.initialize(seed);
  return net;
}

ClassifierMode detect_mode(const Network& net) {
  if (net.layer_count() == 0) throw ContractError("empty network");
  return std::holds_alternative<layer::Dense>(net.layers().front()) ? ClassifierMode::embedding_head
                                                                   : ClassifierMode::scratch_cnn;
}

ClassProbabilities predict(const Network& net, const Tensor& input) {
  const Tensor logits = infer(net, fit_input(net, input));
  const auto logits_d = logits.cast<double>();
  return softmax<double>(logits_d.values());
}

std::size_t argmax(const ClassProbabilities& probabilities) {
  return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) -
                                  probabilities.begin());
}

TrainHistory train_classifier(Network& net, const LabeledSet& train, const LabeledSet& val,
                              const FitConfig& config) {
  const std::size_t n = net.output_shape().size();
  if (train.inputs.empty()) throw ContractError("train_classifier: empty training split");
  check_labels(train, n, "train");
  check_labels(val, n, "validation");
  for (const auto* set : {&train, &val}) {
    for (const auto& input : set->inputs) (void)fit_input(net, input);
  }
  if (config.augment) config.augment->validate();
  const bool images = net.input_shape().height > 1 || net.input_shape().width > 1;
  const auto augment_config = config.augment;
  ExampleSource train_source = [&net, &train, n, images, augment_config](std::size_t i, Rng* rng) {
    Tensor input = fit_input(net, train.inputs[i]);
    if (rng && images && augment_config) input = augment(input, *augment_config, *rng);
    return Example{std::move(input), one_hot(train.labels[i], n)};
  };
  ExampleSource val_source = [&net, &val, n](std::size_t i, Rng*) {
    return Example{fit_input(net, val.inputs[i]), one_hot(val.labels[i], n)};
  };
  return fit(net, FitData{train.inputs.size(), train_source, val.inputs.size(), val_source},
             fit_options(config));
}

TrainHistory train_classifier(Network& net, const DatasetManifest& manifest, const FitConfig& config,
                              const std::function<void(std::size_t, const TrainHistory&)>& on_epoch) {
  if (manifest.splits.train.empty() || manifest.splits.validation.empty()) {
    throw ContractError("train_classifier: manifest train and validation splits must be non-empty");
  }
  const std::size_t n = net.output_shape().size();
  if (n != manifest.vocabulary.size()) {
    throw ContractError("network has " + std::to_string(n) + " outputs but the manifest has " +
                        std::to_string(manifest.vocabulary.size()) + " classes");
  }
  if (config.augment) config.augment->validate();
  const auto labels = manifest.label_map();
  const Shape shape = net.input_shape();
  auto source = [&manifest, &labels, shape, n](const std::vector<std::uint64_t>& ids,
                                               std::optional<AugmentConfig> aug) -> ExampleSource {
    return [&manifest, &labels, &ids, shape, n, aug](std::size_t i, Rng* rng) {
      const std::uint64_t id = ids[i];
      const auto label = labels.find(id);
      if (label == labels.end()) throw LookupError("split id " + std::to_string(id) + " has no label");
      Tensor image = decode_image(manifest.image_path(id), shape.height, shape.width);
      if (rng && aug) image = augment(image, *aug, *rng);
      return Example{std::move(image), one_hot(label->second, n)};
    };
  };
  FitOptions options = fit_options(config);
  options.on_epoch = on_epoch;
  return fit(net,
             FitData{manifest.splits.train.size(), source(manifest.splits.train, config.augment),
                     manifest.splits.validation.size(), source(manifest.splits.validation, std::nullopt)},
             options);
}

LabeledSet embedding_split(const EmbeddingStore& embeddings, const DatasetManifest& manifest,
                           std::span<const std::uint64_t> ids) {
  const auto labels = manifest.label_map();
  LabeledSet set;
  for (std::uint64_t id : ids) {
    if (!embeddings.contains(id)) throw LookupError("no embedding for manifest id " + std::to_string(id));
    const auto label = labels.find(id);
    if (label == labels.end()) throw LookupError("split id " + std::to_string(id) + " has no label");
    const auto v = embeddings.vector(id);
    set.inputs.push_back(Tensor::vector(std::vector<float>(v.begin(), v.end())));
    set.labels.push_back(label->second);
  }
  return set;
}

HeadTraining train_embedding_head(const EmbeddingStore& embeddings, const DatasetManifest& manifest,
                                  const FitConfig& config, std::optional<std::size_t> expected_dim) {
  if (expected_dim && embeddings.dimension() != *expected_dim) {
    throw FormatError("embedding dimension " + std::to_string(embeddings.dimension()) + " differs from expected " +
                      std::to_string(*expected_dim));
  }
  if (embeddings.dimension() == 0) throw FormatError("embedding store is empty");
  const LabeledSet train = embedding_split(embeddings, manifest, manifest.splits.train);
  const LabeledSet val = embedding_split(embeddings, manifest, manifest.splits.validation);
  ClassifierSpec spec;
  spec.mode = ClassifierMode::embedding_head;
  spec.n_classes = manifest.vocabulary.size();
  spec.input_dim = embeddings.dimension();
  HeadTraining out{build_classifier(spec, config.seed), {}};
  FitConfig head_config = config;
  head_config.augment.reset();
  out.history = train_classifier(out.net, train, val, head_config);
  return out;
}

HeadTraining train_embedding_head(const std::string& embedding_file, const DatasetManifest& manifest,
                                  const FitConfig& config, std::optional<std::size_t> expected_dim) {
  return train_embedding_head(import_embeddings(embedding_file, expected_dim), manifest, config, expected_dim);
}

SplitPredictions predict_split(const Network& net, const DatasetManifest& manifest,
                               std::span<const std::uint64_t> ids, const EmbeddingStore* embeddings) {
  const bool head = detect_mode(net) == ClassifierMode::embedding_head;
  if (head && embeddings == nullptr) throw ContractError("an embedding head needs an embedding store");
  if (net.output_shape().size() != manifest.vocabulary.size()) {
    throw ContractError("network outputs do not match the manifest vocabulary");
  }
  const auto labels = manifest.label_map();
  SplitPredictions out;
  for (std::uint64_t id : ids) {
    const auto label = labels.find(id);
    if (label == labels.end()) throw LookupError("id " + std::to_string(id) + " is not in the manifest");
    Tensor input;
    if (head) {
      if (!embeddings->contains(id)) throw LookupError("no embedding for manifest id " + std::to_string(id));
      const auto v = embeddings->vector(id);
      input = Tensor::vector(std::vector<float>(v.begin(), v.end()));
    } else {
      input = decode_image(manifest.image_path(id), net.input_shape().height, net.input_shape().width);
    }
    out.ids.push_back(id);
    out.truth.push_back(label->second);
    out.probabilities.push_back(predict(net, input));
  }
  return out;
}

}  // namespace stylesearch
