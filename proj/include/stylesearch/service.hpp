#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/catalog.hpp"
#include "stylesearch/classifier.hpp"
#include "stylesearch/embedding_store.hpp"
#include "stylesearch/network.hpp"

namespace stylesearch {

struct ClassifierEntry {
  LabelScheme scheme = LabelScheme::article_type;
  std::string weights;
  std::string manifest;
};

// JSON config file:
//   {"host": "127.0.0.1", "port": 8080,
//    "store": "embeddings.femb", "autoencoder": "autoencoder.fnnw",
//    "styles_csv": "styles.csv", "image_dir": "images",
//    "classifiers": [{"scheme": "article-type", "weights": "clf.fnnw",
//                     "manifest": "manifest.json"}],
//    "default_k": 5, "max_k": 100, "max_upload_bytes": 5242880,
//    "cors_origin": "*", "log_requests": true}
// Relative paths resolve against the config file's directory. Only
// "store" and "autoencoder" are needed for search.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store;
  std::string autoencoder;
  std::string styles_csv;
  std::string image_dir;
  std::vector<ClassifierEntry> classifiers;
  std::size_t default_k = 5;
  std::size_t max_k = 100;
  std::size_t max_upload_bytes = 5 * 1024 * 1024;
  std::string cors_origin = "*";
  bool log_requests = true;

  // Throws FormatError on malformed JSON or field types.
  static ServiceConfig from_json(const std::string& text, const std::string& base_dir = "");
};

ServiceConfig load_service_config(const std::string& path);

struct LoadedClassifier {
  Network net;
  ClassifierMode mode = ClassifierMode::scratch_cnn;
  std::vector<std::string> vocabulary;
};

// Immutable state shared by in-flight requests.
struct ServiceSnapshot {
  std::optional<EmbeddingStore> store;
  std::optional<Network> autoencoder;
  std::map<std::uint64_t, ProductRecord> catalog;
  std::string image_dir;
  std::map<LabelScheme, LoadedClassifier> classifiers;
};

// Loads every referenced file; throws (IoError, FormatError, ContractError)
// when one is missing, malformed, or inconsistent with the others.
std::shared_ptr<const ServiceSnapshot> load_snapshot(const ServiceConfig& config);

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Transport-independent request handlers. All handlers are safe to call
// concurrently; reload() swaps the snapshot atomically.
class SearchService {
 public:
  // Loads the snapshot immediately; throws like load_snapshot.
  explicit SearchService(ServiceConfig config);
  SearchService(ServiceConfig config, std::shared_ptr<const ServiceSnapshot> snapshot);

  const ServiceConfig& config() const { return config_; }
  std::shared_ptr<const ServiceSnapshot> snapshot() const;

  // `k` is the raw parameter text, if any.
  ApiResponse search(std::span<const std::uint8_t> image, const std::optional<std::string>& k) const;
  ApiResponse classify(std::span<const std::uint8_t> image, const std::string& scheme) const;
  ApiResponse product(const std::string& id) const;
  ApiResponse product_image(const std::string& id) const;
  ApiResponse health() const;
  ApiResponse reload();

 private:
  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::shared_ptr<const ServiceSnapshot> snapshot_;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message);

// Runs `query` through the encoder and store; shared by the CLI and service.
std::vector<SimilarityHit> search_image(const Network& autoencoder, const EmbeddingStore& store,
                                        std::span<const std::uint8_t> image, std::size_t k);

// HTTP front end:
//   POST /api/search            multipart "image" (+ optional "k" field or ?k=)
//   POST /api/classify          multipart "image" + "scheme" (field or ?scheme=)
//   GET  /api/products/{id}     metadata JSON
//   GET  /api/products/{id}/image
//   GET  /api/health
//   POST /api/admin/reload
class HttpServer {
 public:
  explicit HttpServer(SearchService& service, std::ostream* log = nullptr);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port;
  // throws IoError on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stylesearch
