#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "stylesearch/classifier.hpp"
#include "stylesearch/errors.hpp"
#include "stylesearch/synthetic.hpp"

using namespace stylesearch;
namespace fs = std::filesystem;

namespace {

// Two Gaussian clusters in d dimensions, centers at +/-1.5 on every axis.
EmbeddingStore clusters(std::size_t per_class, std::size_t d, std::uint64_t seed, DatasetManifest& manifest) {
  Rng rng(seed);
  EmbeddingStore store(d);
  manifest = DatasetManifest{};
  manifest.vocabulary = {"left", "right"};
  std::vector<ProductRecord> records;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const std::size_t cls = i % 2;
    std::vector<float> v(d);
    for (float& x : v) {
      // Box-Muller from two uniforms.
      const double u1 = std::max(unit_real(rng), 1e-12);
      const double u2 = unit_real(rng);
      const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
      x = static_cast<float>((cls ? 1.5 : -1.5) + g);
    }
    const std::uint64_t id = 100 + i;
    store.add(id, v);
    manifest.records.push_back({id, cls});
    ProductRecord r;
    r.id = id;
    r.article_type = manifest.vocabulary[cls];
    records.push_back(r);
  }
  manifest.splits = split_dataset(records, LabelScheme::article_type);
  return store;
}

}  // namespace

TEST_CASE("classifier construction", "[classifier]") {
  ClassifierSpec spec;
  spec.n_classes = 23;
  const Network scratch = build_classifier(spec, 1);
  CHECK(scratch.output_shape() == Shape{1, 1, 23});
  CHECK(scratch.layer_count() == 10);
  CHECK(std::get<layer::Dense>(scratch.layers()[7]).in_size == 2048);
  CHECK(detect_mode(scratch) == ClassifierMode::scratch_cnn);
  CHECK(build_classifier(spec, 1).parameters() == scratch.parameters());

  spec.mode = ClassifierMode::embedding_head;
  spec.input_dim = 512;
  spec.n_classes = 12;
  const Network head = build_classifier(spec, 1);
  CHECK(head.input_shape() == Shape{1, 1, 512});
  CHECK(head.output_shape() == Shape{1, 1, 12});
  CHECK(detect_mode(head) == ClassifierMode::embedding_head);

  spec.n_classes = 1;
  CHECK_THROWS_AS(build_classifier(spec), ContractError);
  CHECK(parse_classifier_mode("scratch") == ClassifierMode::scratch_cnn);
  CHECK(parse_classifier_mode("embedding-head") == ClassifierMode::embedding_head);
  CHECK_THROWS_AS(parse_classifier_mode("forest"), ContractError);
}

TEST_CASE("predict is a softmax over the logits", "[classifier]") {
  ClassifierSpec spec;
  spec.mode = ClassifierMode::embedding_head;
  spec.input_dim = 8;
  spec.n_classes = 2;
  Network net = build_classifier(spec, 2);
  auto& params = net.mutable_parameters();
  std::fill(params.back().weights.begin(), params.back().weights.end(), 0.0f);
  const Tensor x = Tensor::vector({0.1f, 0.5f, -0.3f, 1.0f, 0.0f, 0.2f, 0.7f, -1.0f});
  const auto p = predict(net, x);
  CHECK(p[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(p[1] == Catch::Approx(0.5).margin(1e-12));

  net.initialize(3);
  Rng rng(4);
  ClassProbabilities before;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> v(8);
    for (float& f : v) f = static_cast<float>(uniform_real(rng, -2.0, 2.0));
    const auto probs = predict(net, Tensor::vector(v));
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == Catch::Approx(1.0).margin(1e-6));
    for (double q : probs) CHECK(q >= 0.0);
    Network shifted = net;
    for (float& b : shifted.mutable_parameters().back().bias) b += 3.25f;
    CHECK(argmax(predict(shifted, Tensor::vector(v))) == argmax(probs));
  }
  CHECK(predict(net, Tensor(Shape{2, 2, 2}, 0.5f)).size() == 2);
  CHECK_THROWS_AS(predict(net, Tensor::vector({1.0f})), ShapeError);
}

TEST_CASE("embedding head separates two clusters", "[classifier]") {
  DatasetManifest manifest;
  const auto store = clusters(100, 16, 7, manifest);
  FitConfig config;
  config.epochs = 50;
  config.batch_size = 16;
  const auto result = train_embedding_head(store, manifest, config);
  CHECK(result.net.input_shape() == Shape{1, 1, 16});
  CHECK(result.history.epochs_run <= 50);
  const auto val = embedding_split(store, manifest, manifest.splits.validation);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < val.inputs.size(); ++i) {
    correct += argmax(predict(result.net, val.inputs[i])) == val.labels[i] ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(val.inputs.size()) >= 0.98);
  const double best = *std::min_element(result.history.val_loss.begin(), result.history.val_loss.end());
  CHECK(evaluate_examples(result.net, val.inputs.size(),
                          [&](std::size_t i, Rng*) {
                            Tensor t(Shape{1, 1, 2});
                            t[val.labels[i]] = 1.0f;
                            return Example{val.inputs[i], t};
                          },
                          LossKind::categorical_cross_entropy)
            .loss == best);
}

TEST_CASE("embedding head join semantics", "[classifier]") {
  DatasetManifest manifest;
  auto store = clusters(10, 4, 8, manifest);
  store.add(99999, std::vector<float>{1, 2, 3, 4});
  FitConfig config;
  config.epochs = 2;
  CHECK_NOTHROW(train_embedding_head(store, manifest, config));
  CHECK_THROWS_AS(train_embedding_head(store, manifest, config, 512), FormatError);

  const auto path = (fs::temp_directory_path() / "stylesearch_head.femb").string();
  save_store(store, path);
  CHECK(train_embedding_head(path, manifest, config, 4).net.input_shape() == Shape{1, 1, 4});
  CHECK_THROWS_AS(train_embedding_head(path, manifest, config, 8), FormatError);

  EmbeddingStore partial(4);
  for (std::uint64_t id : store.ids()) {
    if (id != manifest.splits.train[1]) partial.add(id, store.vector(id));
  }
  try {
    train_embedding_head(partial, manifest, config);
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find(std::to_string(manifest.splits.train[1])) != std::string::npos);
  }
}

TEST_CASE("in-memory classifier training is deterministic without augmentation", "[classifier]") {
  Rng rng(9);
  LabeledSet train, val;
  for (std::size_t i = 0; i < 24; ++i) {
    LabeledSet& set = i < 16 ? train : val;
    set.inputs.push_back(synthetic_product_image(i % 2, rng, 16, 16));
    set.labels.push_back(i % 2);
  }
  ClassifierSpec spec;
  spec.image = Shape{16, 16, 3};
  FitConfig config;
  config.epochs = 3;
  config.batch_size = 4;
  config.augment.reset();
  Network a = build_classifier(spec, 5);
  Network b = build_classifier(spec, 5);
  const auto ha = train_classifier(a, train, val, config);
  const auto hb = train_classifier(b, train, val, config);
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(ha.val_loss == hb.val_loss);
  CHECK(ha.val_accuracy == hb.val_accuracy);
  CHECK(a.parameters() == b.parameters());

  config.augment = AugmentConfig{};
  Network c = build_classifier(spec, 5);
  const auto hc = train_classifier(c, train, val, config);
  CHECK(hc.train_loss != ha.train_loss);

  LabeledSet bad = train;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(train_classifier(a, bad, val, config), ContractError);
  CHECK_THROWS_AS(train_classifier(a, LabeledSet{}, val, config), ContractError);
}

TEST_CASE("manifest classifier training reads the splits", "[classifier]") {
  const auto dir = fs::temp_directory_path() / "stylesearch_clf_manifest";
  fs::remove_all(dir);
  const auto catalog = write_synthetic_catalog(
      dir.string(), {{"Men", "Accessories", "Watches", "Watches", 15}, {"Men", "Footwear", "Shoes", "Casual Shoes", 15}},
      3);
  const auto report = prepare_dataset(catalog.styles_csv, catalog.image_dir, LabelScheme::article_type, 1, 42);
  ClassifierSpec spec;
  spec.n_classes = 2;
  Network net = build_classifier(spec, 1);
  FitConfig config;
  config.epochs = 2;
  config.batch_size = 8;
  std::size_t seen = 0;
  const auto history = train_classifier(net, report.manifest, config,
                                        [&](std::size_t, const TrainHistory&) { ++seen; });
  CHECK(history.epochs_run == 2);
  CHECK(seen == 2);
  CHECK(history.val_accuracy.size() == 2);
  CHECK(history.learning_rate.size() == 2);

  auto empty = report.manifest;
  empty.splits.validation.clear();
  CHECK_THROWS_AS(train_classifier(net, empty, config), ContractError);
  spec.n_classes = 3;
  Network three = build_classifier(spec, 1);
  CHECK_THROWS_AS(train_classifier(three, report.manifest, config), ContractError);
}
