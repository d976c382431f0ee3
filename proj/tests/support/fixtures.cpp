#include "support/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "stylesearch/autoencoder.hpp"
#include "stylesearch/classifier.hpp"
#include "stylesearch/image_io.hpp"
#include "stylesearch/weights_io.hpp"

namespace testsupport {

using namespace stylesearch;
namespace fs = std::filesystem;

ServiceFixture make_service_fixture(const std::string& name, std::size_t per_class,
                                    std::size_t autoencoder_epochs) {
  ServiceFixture fx;
  const fs::path dir = fs::temp_directory_path() / ("stylesearch_fixture_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  fx.dir = dir.string();
  fx.catalog = write_synthetic_catalog(fx.dir,
                                       {{"Men", "Accessories", "Watches", "Watches", per_class},
                                        {"Men", "Footwear", "Shoes", "Casual Shoes", per_class},
                                        {"Women", "Apparel", "Topwear", "Tshirts", per_class}},
                                       17);

  Network autoencoder = build_autoencoder({}, 3);
  if (autoencoder_epochs > 0) {
    std::vector<ImageTensor> images;
    for (auto id : fx.catalog.ids) {
      images.push_back(decode_image((fs::path(fx.catalog.image_dir) / (std::to_string(id) + ".jpg")).string()));
    }
    TrainConfig config;
    config.epochs = autoencoder_epochs;
    config.batch_size = 8;
    config.early_stop_patience = 0;
    train_autoencoder(autoencoder, images, {}, config);
  }
  save_network(autoencoder, (dir / "autoencoder.fnnw").string());
  const EmbeddingStore store = embed_catalog(autoencoder, fx.catalog.image_dir, fx.catalog.ids);
  save_store(store, (dir / "embeddings.femb").string());

  fx.manifest = prepare_dataset(fx.catalog.styles_csv, fx.catalog.image_dir, LabelScheme::article_type, 1, 42).manifest;
  save_manifest(fx.manifest, (dir / "article.json").string());
  FitConfig fit;
  fit.epochs = 5;
  fit.batch_size = 4;
  save_network(train_embedding_head(store, fx.manifest, fit).net, (dir / "article_head.fnnw").string());

  const auto sub = prepare_dataset(fx.catalog.styles_csv, fx.catalog.image_dir, LabelScheme::sub_category, 1, 42).manifest;
  save_manifest(sub, (dir / "sub.json").string());
  ClassifierSpec spec;
  spec.n_classes = sub.vocabulary.size();
  save_network(build_classifier(spec, 5), (dir / "sub_scratch.fnnw").string());

  const nlohmann::json config{
      {"host", "127.0.0.1"},
      {"port", 0},
      {"store", "embeddings.femb"},
      {"autoencoder", "autoencoder.fnnw"},
      {"styles_csv", "styles.csv"},
      {"image_dir", "images"},
      {"classifiers",
       {{{"scheme", "article-type"}, {"weights", "article_head.fnnw"}, {"manifest", "article.json"}},
        {{"scheme", "sub-category"}, {"weights", "sub_scratch.fnnw"}, {"manifest", "sub.json"}}}},
      {"default_k", 5},
      {"log_requests", true}};
  fx.config_path = (dir / "service.json").string();
  std::ofstream(fx.config_path) << config.dump(2);
  fx.config = load_service_config(fx.config_path);
  return fx;
}

}  // namespace testsupport
