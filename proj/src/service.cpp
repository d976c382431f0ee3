#include "stylesearch/service.hpp"

#include <httplib.h>

#include <chrono>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "stylesearch/autoencoder.hpp"
#include "stylesearch/errors.hpp"
#include "stylesearch/image_io.hpp"
#include "stylesearch/manifest.hpp"
#include "stylesearch/weights_io.hpp"

namespace stylesearch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
T field(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("service config: field '") + key + "' has the wrong type");
  }
}

std::optional<std::uint64_t> parse_unsigned(const std::string& text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

ApiResponse json_response(int status, const json& body) { return ApiResponse{status, "application/json", body.dump()}; }

std::string image_url(std::uint64_t id) { return "/api/products/" + std::to_string(id) + "/image"; }

json record_json(std::uint64_t id, const ProductRecord* r) {
  static const ProductRecord empty;
  const ProductRecord& rec = r ? *r : empty;
  return json{{"id", id},
              {"gender", rec.gender},
              {"master_category", rec.master_category},
              {"sub_category", rec.sub_category},
              {"article_type", rec.article_type},
              {"base_colour", rec.base_colour},
              {"season", rec.season},
              {"year", rec.year},
              {"usage", rec.usage},
              {"display_name", rec.display_name},
              {"image_url", image_url(id)}};
}

std::size_t embedding_dim(const Network& autoencoder) {
  if (autoencoder.layer_count() < kEncoderLayers) {
    throw ContractError("autoencoder has " + std::to_string(autoencoder.layer_count()) + " layers, fewer than the encoder");
  }
  return autoencoder.shapes()[kEncoderLayers].size();
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("service config is not valid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw FormatError("service config must be a JSON object");
  static const char* known[] = {"host", "port", "store", "autoencoder", "styles_csv", "image_dir", "classifiers",
                                "default_k", "max_k", "max_upload_bytes", "cors_origin", "log_requests"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw FormatError("service config: unknown field '" + key + "'");
    }
  }
  ServiceConfig c;
  c.host = field(j, "host", c.host);
  c.port = field(j, "port", c.port);
  c.store = resolve(field(j, "store", c.store), base_dir);
  c.autoencoder = resolve(field(j, "autoencoder", c.autoencoder), base_dir);
  c.styles_csv = resolve(field(j, "styles_csv", c.styles_csv), base_dir);
  c.image_dir = resolve(field(j, "image_dir", c.image_dir), base_dir);
  c.default_k = field(j, "default_k", c.default_k);
  c.max_k = field(j, "max_k", c.max_k);
  c.max_upload_bytes = field(j, "max_upload_bytes", c.max_upload_bytes);
  c.cors_origin = field(j, "cors_origin", c.cors_origin);
  c.log_requests = field(j, "log_requests", c.log_requests);
  if (j.contains("classifiers")) {
    if (!j["classifiers"].is_array()) throw FormatError("service config: classifiers must be an array");
    for (const auto& entry : j["classifiers"]) {
      if (!entry.is_object()) throw FormatError("service config: classifier entries must be objects");
      ClassifierEntry e;
      try {
        e.scheme = parse_label_scheme(field<std::string>(entry, "scheme", ""));
      } catch (const ContractError& err) {
        throw FormatError(std::string("service config: ") + err.what());
      }
      e.weights = resolve(field<std::string>(entry, "weights", ""), base_dir);
      e.manifest = resolve(field<std::string>(entry, "manifest", ""), base_dir);
      if (e.weights.empty() || e.manifest.empty()) {
        throw FormatError("service config: classifier entries need weights and manifest");
      }
      c.classifiers.push_back(std::move(e));
    }
  }
  if (c.port < 0 || c.port > 65535) throw FormatError("service config: port out of range");
  if (c.default_k == 0 || c.max_k == 0 || c.default_k > c.max_k) {
    throw FormatError("service config: need 1 <= default_k <= max_k");
  }
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ServiceConfig::from_json(text, fs::path(path).parent_path().string());
}

std::shared_ptr<const ServiceSnapshot> load_snapshot(const ServiceConfig& config) {
  auto snap = std::make_shared<ServiceSnapshot>();
  if (config.store.empty() != config.autoencoder.empty()) {
    throw ContractError("service config: store and autoencoder must be given together");
  }
  if (!config.autoencoder.empty()) {
    snap->autoencoder = load_network(config.autoencoder);
    const std::size_t dim = embedding_dim(*snap->autoencoder);
    snap->store = import_embeddings(config.store);
    if (!snap->store->empty() && snap->store->dimension() != dim) {
      throw FormatError("embedding store dimension " + std::to_string(snap->store->dimension()) +
                        " does not match the encoder output " + std::to_string(dim));
    }
  }
  if (!config.styles_csv.empty()) {
    for (auto& record : load_metadata(config.styles_csv).records) {
      const auto id = record.id;
      snap->catalog.emplace(id, std::move(record));
    }
  }
  snap->image_dir = config.image_dir;
  for (const auto& entry : config.classifiers) {
    LoadedClassifier loaded;
    const DatasetManifest manifest = load_manifest(entry.manifest);
    loaded.vocabulary = manifest.vocabulary;
    loaded.net = load_network(entry.weights);
    loaded.mode = detect_mode(loaded.net);
    if (loaded.net.output_shape().size() != loaded.vocabulary.size()) {
      throw ContractError("classifier '" + entry.weights + "' has " + std::to_string(loaded.net.output_shape().size()) +
                          " outputs but its manifest lists " + std::to_string(loaded.vocabulary.size()) + " classes");
    }
    if (loaded.mode == ClassifierMode::embedding_head) {
      if (!snap->autoencoder || embedding_dim(*snap->autoencoder) != loaded.net.input_shape().size()) {
        throw ContractError("classifier head '" + entry.weights + "' needs an autoencoder producing " +
                            std::to_string(loaded.net.input_shape().size()) + "-dim embeddings");
      }
    }
    snap->classifiers[entry.scheme] = std::move(loaded);
  }
  return snap;
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return json_response(status, json{{"error", {{"code", code}, {"message", message}}}});
}

std::vector<SimilarityHit> search_image(const Network& autoencoder, const EmbeddingStore& store,
                                        std::span<const std::uint8_t> image, std::size_t k) {
  const Shape in = autoencoder.input_shape();
  const ImageTensor decoded = decode_image_bytes(image, in.height, in.width, "<upload>");
  return store.top_k(encode(autoencoder, decoded), k);
}

SearchService::SearchService(ServiceConfig config) : config_(std::move(config)) {
  snapshot_ = load_snapshot(config_);
}

SearchService::SearchService(ServiceConfig config, std::shared_ptr<const ServiceSnapshot> snapshot)
    : config_(std::move(config)), snapshot_(std::move(snapshot)) {}

std::shared_ptr<const ServiceSnapshot> SearchService::snapshot() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

ApiResponse SearchService::search(std::span<const std::uint8_t> image, const std::optional<std::string>& k_text) const {
  const auto snap = snapshot();
  if (!snap->store || !snap->autoencoder) return error_response(503, "store_not_loaded", "no embedding store is loaded");
  std::size_t k = config_.default_k;
  if (k_text) {
    const auto parsed = parse_unsigned(*k_text);
    if (!parsed || *parsed < 1 || *parsed > config_.max_k) {
      return error_response(400, "invalid_k", "k must be an integer between 1 and " + std::to_string(config_.max_k));
    }
    k = static_cast<std::size_t>(*parsed);
  }
  if (image.empty()) return error_response(400, "missing_image", "multipart field 'image' is required");
  if (image.size() > config_.max_upload_bytes) {
    return error_response(413, "upload_too_large",
                          "upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes");
  }
  std::vector<SimilarityHit> hits;
  try {
    hits = search_image(*snap->autoencoder, *snap->store, image, k);
  } catch (const DecodeError& e) {
    return error_response(422, "undecodable_image", e.what());
  }
  json out = json::array();
  for (const auto& hit : hits) {
    const auto found = snap->catalog.find(hit.id);
    json item = record_json(hit.id, found == snap->catalog.end() ? nullptr : &found->second);
    item["score"] = hit.score;
    out.push_back(std::move(item));
  }
  return json_response(200, json{{"k", k}, {"hits", std::move(out)}});
}

ApiResponse SearchService::classify(std::span<const std::uint8_t> image, const std::string& scheme_text) const {
  const auto snap = snapshot();
  LabelScheme scheme;
  try {
    scheme = parse_label_scheme(scheme_text);
  } catch (const ContractError& e) {
    return error_response(400, "unknown_scheme", e.what());
  }
  const auto found = snap->classifiers.find(scheme);
  if (found == snap->classifiers.end()) {
    return error_response(409, "no_classifier", "no classifier is loaded for scheme '" + to_string(scheme) + "'");
  }
  if (image.empty()) return error_response(400, "missing_image", "multipart field 'image' is required");
  if (image.size() > config_.max_upload_bytes) {
    return error_response(413, "upload_too_large",
                          "upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes");
  }
  const LoadedClassifier& clf = found->second;
  ClassProbabilities probs;
  try {
    if (clf.mode == ClassifierMode::embedding_head) {
      const Shape in = snap->autoencoder->input_shape();
      const auto embedding = encode(*snap->autoencoder, decode_image_bytes(image, in.height, in.width, "<upload>"));
      probs = predict(clf.net, Tensor::vector(embedding));
    } else {
      const Shape in = clf.net.input_shape();
      probs = predict(clf.net, decode_image_bytes(image, in.height, in.width, "<upload>"));
    }
  } catch (const DecodeError& e) {
    return error_response(422, "undecodable_image", e.what());
  }
  json list = json::array();
  for (std::size_t c = 0; c < probs.size(); ++c) {
    list.push_back({{"label", clf.vocabulary[c]}, {"probability", probs[c]}});
  }
  return json_response(200, json{{"scheme", to_string(scheme)},
                                 {"label", clf.vocabulary[argmax(probs)]},
                                 {"probabilities", std::move(list)}});
}

ApiResponse SearchService::product(const std::string& id_text) const {
  const auto snap = snapshot();
  const auto id = parse_unsigned(id_text);
  if (!id) return error_response(400, "invalid_id", "product id must be a positive integer");
  const auto found = snap->catalog.find(*id);
  if (found == snap->catalog.end()) return error_response(404, "unknown_product", "no product " + id_text);
  return json_response(200, record_json(*id, &found->second));
}

ApiResponse SearchService::product_image(const std::string& id_text) const {
  const auto snap = snapshot();
  const auto id = parse_unsigned(id_text);
  if (!id) return error_response(400, "invalid_id", "product id must be a positive integer");
  const bool known = snap->catalog.empty() ? (snap->store && snap->store->contains(*id)) : snap->catalog.count(*id) > 0;
  if (!known || snap->image_dir.empty()) return error_response(404, "unknown_product", "no product " + id_text);
  const auto path = fs::path(snap->image_dir) / (std::to_string(*id) + ".jpg");
  std::ifstream in(path, std::ios::binary);
  if (!in) return error_response(404, "image_not_found", "no image for product " + id_text);
  return ApiResponse{200, "image/jpeg",
                     std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>())};
}

ApiResponse SearchService::health() const {
  const auto snap = snapshot();
  json classifiers = json::array();
  for (const auto& [scheme, clf] : snap->classifiers) classifiers.push_back(to_string(scheme));
  const bool ready = snap->store && snap->autoencoder;
  return json_response(ready ? 200 : 503,
                       json{{"status", ready ? "ok" : "unavailable"},
                            {"store_size", snap->store ? snap->store->size() : 0},
                            {"dimension", snap->store ? snap->store->dimension() : 0},
                            {"catalog_size", snap->catalog.size()},
                            {"classifiers", std::move(classifiers)}});
}

ApiResponse SearchService::reload() {
  std::shared_ptr<const ServiceSnapshot> fresh;
  try {
    fresh = load_snapshot(config_);
  } catch (const std::exception& e) {
    return error_response(500, "reload_failed", e.what());
  }
  {
    std::lock_guard lock(mutex_);
    snapshot_ = fresh;
  }
  return json_response(200, json{{"status", "reloaded"}, {"store_size", fresh->store ? fresh->store->size() : 0}});
}

struct HttpServer::Impl {
  SearchService& service;
  std::ostream* log;
  httplib::Server server;
  std::mutex log_mutex;

  Impl(SearchService& s, std::ostream* l) : service(s), log(l) {}
};

namespace {

thread_local std::chrono::steady_clock::time_point request_start;

void send(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_content(api.body, api.content_type);
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Multipart text fields arrive as parts too; fall back to the query string.
std::optional<std::string> form_value(const httplib::Request& req, const char* name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

std::string upload(const httplib::Request& req) {
  if (req.has_file("image")) return req.get_file_value("image").content;
  if (!req.is_multipart_form_data() && req.get_header_value("Content-Type").rfind("image/", 0) == 0) return req.body;
  return {};
}

}  // namespace

HttpServer::HttpServer(SearchService& service, std::ostream* log) : impl_(std::make_unique<Impl>(service, log)) {
  auto& svr = impl_->server;
  Impl* impl = impl_.get();
  const ServiceConfig& config = service.config();
  svr.set_payload_max_length(config.max_upload_bytes + 1024 * 1024);

  svr.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
    request_start = std::chrono::steady_clock::now();
    return httplib::Server::HandlerResponse::Unhandled;
  });
  const std::string origin = config.cors_origin;
  svr.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (!origin.empty()) res.set_header("Access-Control-Allow-Origin", origin);
  });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const int status = res.status;
    const char* code = status == 404 ? "not_found" : status == 413 ? "upload_too_large" : "http_error";
    send(res, error_response(status, code, httplib::status_message(status)));
    return httplib::Server::HandlerResponse::Handled;
  });
  if (config.log_requests && impl->log) {
    svr.set_logger([impl](const httplib::Request& req, const httplib::Response& res) {
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - request_start).count();
      const json line{{"method", req.method}, {"path", req.path}, {"status", res.status}, {"latency_ms", ms}};
      std::lock_guard lock(impl->log_mutex);
      *impl->log << line.dump() << '\n' << std::flush;
    });
  }

  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  svr.Post("/api/search", [impl](const httplib::Request& req, httplib::Response& res) {
    send(res, impl->service.search(as_bytes(upload(req)), form_value(req, "k")));
  });
  svr.Post("/api/classify", [impl](const httplib::Request& req, httplib::Response& res) {
    send(res, impl->service.classify(as_bytes(upload(req)), form_value(req, "scheme").value_or("")));
  });
  svr.Get(R"(/api/products/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
    send(res, impl->service.product(req.matches[1]));
  });
  svr.Get(R"(/api/products/([^/]+)/image)", [impl](const httplib::Request& req, httplib::Response& res) {
    send(res, impl->service.product_image(req.matches[1]));
  });
  svr.Get("/api/health", [impl](const httplib::Request&, httplib::Response& res) { send(res, impl->service.health()); });
  svr.Post("/api/admin/reload", [impl](const httplib::Request&, httplib::Response& res) {
    send(res, impl->service.reload());
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind to " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) throw IoError("cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace stylesearch
