#pragma once

#include <string>

#include "stylesearch/manifest.hpp"
#include "stylesearch/service.hpp"
#include "stylesearch/synthetic.hpp"

namespace testsupport {

// A self-contained service deployment in a temp directory: synthetic
// catalog, autoencoder weights, FEMB store of every catalog image, an
// article-type manifest with an embedding-head classifier, a sub-category
// manifest with an untrained scratch CNN, and service.json tying them
// together.
struct ServiceFixture {
  std::string dir;
  std::string config_path;
  stylesearch::SyntheticCatalog catalog;
  stylesearch::DatasetManifest manifest;
  stylesearch::ServiceConfig config;
};

ServiceFixture make_service_fixture(const std::string& name, std::size_t per_class = 6,
                                    std::size_t autoencoder_epochs = 0);

}  // namespace testsupport
