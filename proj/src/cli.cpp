#include "stylesearch/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "stylesearch/autoencoder.hpp"
#include "stylesearch/classifier.hpp"
#include "stylesearch/errors.hpp"
#include "stylesearch/eval.hpp"
#include "stylesearch/image_io.hpp"
#include "stylesearch/manifest.hpp"
#include "stylesearch/service.hpp"
#include "stylesearch/synthetic.hpp"
#include "stylesearch/weights_io.hpp"

namespace stylesearch {
namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint64_t> first_n(std::vector<std::uint64_t> ids, std::size_t limit) {
  if (limit > 0 && ids.size() > limit) ids.resize(limit);
  return ids;
}

const std::vector<std::uint64_t>& split_ids(const DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.splits.train;
  if (split == "validation" || split == "val") return m.splits.validation;
  if (split == "test") return m.splits.test;
  throw ContractError("unknown split '" + split + "' (expected train, validation or test)");
}

std::function<void(std::size_t, const TrainHistory&)> progress(std::ostream& out) {
  return [&out](std::size_t epoch, const TrainHistory& h) {
    out << "epoch " << epoch << "  loss " << std::setprecision(5) << h.train_loss.back();
    if (!h.val_loss.empty()) out << "  val_loss " << h.val_loss.back();
    if (!h.val_accuracy.empty()) out << "  val_acc " << h.val_accuracy.back();
    out << "  lr " << h.learning_rate.back() << '\n' << std::flush;
  };
}

struct PrepArgs {
  std::string styles, images, scheme = "article-type", out;
  std::size_t min_class_size = 500;
  std::uint64_t seed = 42;
};

int cmd_prep(const PrepArgs& a, std::ostream& out) {
  const auto scheme = parse_label_scheme(a.scheme);
  if (!fs::is_directory(a.images)) throw IoError("image directory '" + a.images + "' does not exist");
  const auto report = prepare_dataset(a.styles, a.images, scheme, a.min_class_size, a.seed);
  if (report.manifest.records.empty()) {
    throw ContractError("no class has at least " + std::to_string(a.min_class_size) + " images");
  }
  save_manifest(report.manifest, a.out);
  const auto& m = report.manifest;
  out << "scheme            " << to_string(scheme) << '\n'
      << "metadata rows     " << report.metadata_records << " (" << report.skipped_rows << " skipped)\n"
      << "matched images    " << report.matched_records << '\n'
      << "classes           " << report.classes_before << " -> " << report.classes_after << '\n'
      << "images            " << report.images_after << '\n'
      << "splits            train " << m.splits.train.size() << ", validation " << m.splits.validation.size()
      << ", test " << m.splits.test.size() << '\n'
      << "manifest          " << a.out << '\n';
  return 0;
}

struct TrainAeArgs {
  std::string manifest, out, history;
  std::size_t epochs = 50, batch = 32, patience = 5, limit = 0;
  double lr = 1e-3;
  std::uint64_t seed = 42;
};

int cmd_train_ae(const TrainAeArgs& a, std::ostream& out) {
  const auto m = load_manifest(a.manifest);
  const auto train = first_n(m.splits.train, a.limit);
  const auto val = first_n(m.splits.validation, a.limit);
  if (train.empty()) throw ContractError("manifest has an empty train split");
  auto source = [&m](const std::vector<std::uint64_t>& ids) -> ExampleSource {
    return [&m, &ids](std::size_t i, Rng*) {
      auto img = decode_image(m.image_path(ids[i]), m.target_height, m.target_width);
      return Example{img, img};
    };
  };
  AutoencoderSpec spec;
  spec.input = Shape{m.target_height, m.target_width, 3};
  Network net = build_autoencoder(spec, a.seed);
  TrainConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.lr;
  config.early_stop_patience = a.patience;
  config.shuffle_seed = a.seed;
  out << "training autoencoder on " << train.size() << " images (" << val.size() << " validation)\n";
  const auto history = train_autoencoder(net, train.size(), source(train), val.size(), source(val), config);
  for (std::size_t e = 0; e < history.epochs_run; ++e) {
    out << "epoch " << e + 1 << "  loss " << history.train_loss[e];
    if (e < history.val_loss.size()) out << "  val_loss " << history.val_loss[e];
    out << '\n';
  }
  save_network(net, a.out);
  if (!a.history.empty()) history.write_csv(a.history);
  out << "initial mse " << history.initial_train_loss << ", final mse " << history.train_loss.back() << '\n'
      << "weights written to " << a.out << '\n';
  return 0;
}

struct EmbedArgs {
  std::string manifest, weights, out;
};

int cmd_embed(const EmbedArgs& a, std::ostream& out) {
  const auto m = load_manifest(a.manifest);
  const Network net = load_network(a.weights);
  std::vector<std::uint64_t> ids;
  for (const auto& r : m.records) ids.push_back(r.id);
  const auto store = embed_catalog(net, m.image_dir, ids);
  save_store(store, a.out);
  out << "embedded " << store.size() << " images (dimension " << store.dimension() << ") into " << a.out << '\n';
  return 0;
}

struct TrainClfArgs {
  std::string mode = "scratch", manifest, embeddings, out, history;
  std::size_t epochs = 30, batch = 32, patience = 5, plateau_patience = 3;
  double lr = 1e-3;
  bool no_augment = false;
  std::uint64_t seed = 42;
};

int cmd_train_clf(const TrainClfArgs& a, std::ostream& out) {
  const auto mode = parse_classifier_mode(a.mode);
  const auto m = load_manifest(a.manifest);
  FitConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.lr;
  config.early_stop_patience = a.patience;
  config.plateau_patience = a.plateau_patience;
  config.seed = a.seed;
  if (a.no_augment) config.augment.reset();

  Network net;
  TrainHistory history;
  if (mode == ClassifierMode::embedding_head) {
    if (a.embeddings.empty()) throw ContractError("--mode head requires --embeddings");
    auto result = train_embedding_head(a.embeddings, m, config);
    net = std::move(result.net);
    history = std::move(result.history);
    for (std::size_t e = 0; e < history.epochs_run; ++e) {
      out << "epoch " << e + 1 << "  loss " << history.train_loss[e] << "  val_acc " << history.val_accuracy[e]
          << '\n';
    }
  } else {
    ClassifierSpec spec;
    spec.n_classes = m.vocabulary.size();
    spec.image = Shape{m.target_height, m.target_width, 3};
    net = build_classifier(spec, a.seed);
    history = train_classifier(net, m, config, progress(out));
  }
  save_network(net, a.out);
  if (!a.history.empty()) history.write_csv(a.history);
  out << "best epoch " << history.best_epoch << " of " << history.epochs_run
      << (history.stopped_early ? " (stopped early)" : "") << '\n'
      << "weights written to " << a.out << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string weights, manifest, embeddings, split = "test", out, csv;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto m = load_manifest(a.manifest);
  const Network net = load_network(a.weights);
  std::optional<EmbeddingStore> store;
  if (detect_mode(net) == ClassifierMode::embedding_head) {
    if (a.embeddings.empty()) throw ContractError("an embedding-head classifier needs --embeddings");
    store = load_store(a.embeddings);
  }
  const auto& ids = split_ids(m, a.split);
  if (ids.empty()) throw ContractError("split '" + a.split + "' is empty");
  const auto predictions = predict_split(net, m, ids, store ? &*store : nullptr);
  const auto report = evaluate_predictions(predictions.truth, predictions.probabilities, m.vocabulary);
  if (!a.out.empty()) write_text(a.out, report.to_json());
  if (!a.csv.empty()) {
    write_text(a.csv + "_confusion.csv", report.confusion_csv());
    write_text(a.csv + "_normalized.csv", report.normalized_csv());
  }
  out << "split     " << a.split << " (" << report.samples << " samples)\n"
      << "accuracy  " << std::fixed << std::setprecision(4) << report.accuracy << '\n'
      << "mean AP   " << report.mean_average_precision << "\n\n"
      << report.render_normalized();
  out.unsetf(std::ios::floatfield);
  return 0;
}

struct SearchArgs {
  std::string image, config, store, weights, styles;
  std::size_t k = 5;
};

int cmd_search(const SearchArgs& a, std::ostream& out) {
  std::string store_path = a.store, weights_path = a.weights, styles_path = a.styles;
  if (!a.config.empty()) {
    const auto config = load_service_config(a.config);
    if (store_path.empty()) store_path = config.store;
    if (weights_path.empty()) weights_path = config.autoencoder;
    if (styles_path.empty()) styles_path = config.styles_csv;
  }
  if (store_path.empty() || weights_path.empty()) {
    throw ContractError("search needs --store and --weights (or --config)");
  }
  if (a.k == 0) throw ContractError("--k must be at least 1");
  const auto store = load_store(store_path);
  const Network net = load_network(weights_path);
  const auto hits = search_image(net, store, read_bytes(a.image), a.k);

  std::map<std::uint64_t, ProductRecord> catalog;
  if (!styles_path.empty()) {
    for (auto& r : load_metadata(styles_path).records) catalog.emplace(r.id, std::move(r));
  }
  out << std::left << std::setw(6) << "rank" << std::setw(10) << "id" << std::setw(10) << "score"
      << std::setw(10) << "gender" << std::setw(16) << "master" << std::setw(16) << "sub" << "article\n";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto it = catalog.find(hits[i].id);
    std::ostringstream score;
    score << std::fixed << std::setprecision(4) << hits[i].score;
    out << std::setw(6) << i + 1 << std::setw(10) << hits[i].id << std::setw(10) << score.str();
    if (it != catalog.end()) {
      const auto& r = it->second;
      out << std::setw(10) << r.gender << std::setw(16) << r.master_category << std::setw(16) << r.sub_category
          << r.article_type;
    }
    out << '\n';
  }
  return 0;
}

struct ServeArgs {
  std::string config;
  std::optional<int> port;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  auto config = load_service_config(a.config);
  if (a.port) config.port = *a.port;
  SearchService service(config);
  HttpServer server(service, config.log_requests ? &out : nullptr);
  const int port = server.bind(config.host, config.port);
  out << "{\"event\":\"listening\",\"host\":\"" << config.host << "\",\"port\":" << port << "}" << std::endl;
  server.run();
  return 0;
}

struct SynthArgs {
  std::string out;
  std::size_t classes = 3, per_class = 50;
  std::uint64_t seed = 7;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  static const char* const kNames[] = {"Watches", "Wide Bars", "Tall Bars", "Triangles", "Rings", "Crosses"};
  if (a.classes < 1 || a.classes > 6) throw ContractError("--classes must be between 1 and 6");
  std::vector<SyntheticClass> classes;
  for (std::size_t i = 0; i < a.classes; ++i) {
    classes.push_back({"Unisex", "Accessories", kNames[i], kNames[i], a.per_class});
  }
  const auto catalog = write_synthetic_catalog(a.out, classes, a.seed);
  out << "wrote " << catalog.ids.size() << " products to " << catalog.styles_csv << " and " << catalog.image_dir
      << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fashion visual search and classification"};
  app.require_subcommand(1);

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Build a dataset manifest from styles.csv and an image directory");
  p->add_option("--styles", prep.styles, "Path to styles.csv")->required();
  p->add_option("--images", prep.images, "Directory of {id}.jpg images")->required();
  p->add_option("--scheme", prep.scheme, "gender-master, sub-category or article-type")->capture_default_str();
  p->add_option("--min-class-size", prep.min_class_size, "Drop classes with fewer images")->capture_default_str();
  p->add_option("--seed", prep.seed, "Split seed")->capture_default_str();
  p->add_option("--out", prep.out, "Manifest path")->required();

  TrainAeArgs ae;
  auto* t = app.add_subcommand("train-ae", "Train the convolutional autoencoder");
  t->add_option("--manifest", ae.manifest)->required();
  t->add_option("--out", ae.out, "Weights path")->required();
  t->add_option("--epochs", ae.epochs)->capture_default_str();
  t->add_option("--batch-size", ae.batch)->capture_default_str();
  t->add_option("--lr", ae.lr)->capture_default_str();
  t->add_option("--patience", ae.patience, "Early-stopping patience; 0 disables")->capture_default_str();
  t->add_option("--limit", ae.limit, "Use at most this many images per split; 0 means all");
  t->add_option("--seed", ae.seed)->capture_default_str();
  t->add_option("--history", ae.history, "Write per-epoch CSV");

  EmbedArgs embed;
  auto* e = app.add_subcommand("embed", "Encode every manifest image into an embedding file");
  e->add_option("--manifest", embed.manifest)->required();
  e->add_option("--weights", embed.weights, "Autoencoder weights")->required();
  e->add_option("--out", embed.out, "Embedding file")->required();

  TrainClfArgs clf;
  auto* c = app.add_subcommand("train-clf", "Train a classifier");
  c->add_option("--mode", clf.mode, "scratch or head")->capture_default_str();
  c->add_option("--manifest", clf.manifest)->required();
  c->add_option("--embeddings", clf.embeddings, "Embedding file (head mode)");
  c->add_option("--out", clf.out, "Weights path")->required();
  c->add_option("--epochs", clf.epochs)->capture_default_str();
  c->add_option("--batch-size", clf.batch)->capture_default_str();
  c->add_option("--lr", clf.lr)->capture_default_str();
  c->add_option("--patience", clf.patience)->capture_default_str();
  c->add_option("--plateau-patience", clf.plateau_patience)->capture_default_str();
  c->add_flag("--no-augment", clf.no_augment);
  c->add_option("--seed", clf.seed)->capture_default_str();
  c->add_option("--history", clf.history, "Write per-epoch CSV");

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Evaluate a classifier on a manifest split");
  v->add_option("--weights", ev.weights)->required();
  v->add_option("--manifest", ev.manifest)->required();
  v->add_option("--embeddings", ev.embeddings, "Embedding file (head classifiers)");
  v->add_option("--split", ev.split, "train, validation or test")->capture_default_str();
  v->add_option("--out", ev.out, "Report JSON path");
  v->add_option("--csv", ev.csv, "Prefix for confusion CSV files");

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Find the catalog images most similar to a query image");
  s->add_option("--image", search.image)->required();
  s->add_option("--k", search.k)->capture_default_str();
  s->add_option("--config", search.config, "Service config supplying store, weights and styles");
  s->add_option("--store", search.store, "Embedding file");
  s->add_option("--weights", search.weights, "Autoencoder weights");
  s->add_option("--styles", search.styles, "styles.csv for hit metadata");

  ServeArgs serve;
  auto* h = app.add_subcommand("serve", "Run the HTTP API");
  h->add_option("--config", serve.config)->required();
  h->add_option("--port", serve.port, "Override the configured port");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Write a small synthetic catalog for demos");
  y->add_option("--out", synth.out)->required();
  y->add_option("--classes", synth.classes)->capture_default_str();
  y->add_option("--per-class", synth.per_class)->capture_default_str();
  y->add_option("--seed", synth.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*p) return cmd_prep(prep, out);
    if (*t) return cmd_train_ae(ae, out);
    if (*e) return cmd_embed(embed, out);
    if (*c) return cmd_train_clf(clf, out);
    if (*v) return cmd_evaluate(ev, out);
    if (*s) return cmd_search(search, out);
    if (*h) return cmd_serve(serve, out);
    if (*y) return cmd_synth(synth, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace stylesearch
