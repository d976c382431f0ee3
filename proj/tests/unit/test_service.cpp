#include <catch_amalgamated.hpp>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "stylesearch/errors.hpp"
#include "stylesearch/image_io.hpp"
#include "support/fixtures.hpp"

using namespace stylesearch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const testsupport::ServiceFixture& fixture() {
  static const auto fx = testsupport::make_service_fixture("service");
  return fx;
}

std::vector<std::uint8_t> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> catalog_image(std::uint64_t id) {
  return file_bytes((fs::path(fixture().catalog.image_dir) / (std::to_string(id) + ".jpg")).string());
}

std::string as_string(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

// Serves on an ephemeral port for the lifetime of the object.
struct LiveServer {
  SearchService service;
  std::ostringstream log;
  HttpServer http;
  int port;
  std::thread thread;

  explicit LiveServer(ServiceConfig config)
      : service(std::move(config)), http(service, &log), port(http.bind("127.0.0.1", 0)),
        thread([this] { http.run(); }) {}
  ~LiveServer() { shutdown(); }
  void shutdown() {
    if (!thread.joinable()) return;
    http.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

}  // namespace

TEST_CASE("service config parsing", "[service]") {
  const auto c = ServiceConfig::from_json(
      R"({"port": 9000, "store": "s.femb", "autoencoder": "/abs/ae.fnnw",
          "classifiers": [{"scheme": "ArticleType", "weights": "w.fnnw", "manifest": "m.json"}]})",
      "/base");
  CHECK(c.port == 9000);
  CHECK(c.store == "/base/s.femb");
  CHECK(c.autoencoder == "/abs/ae.fnnw");
  CHECK(c.default_k == 5);
  CHECK(c.max_upload_bytes == 5u * 1024 * 1024);
  REQUIRE(c.classifiers.size() == 1);
  CHECK(c.classifiers[0].scheme == LabelScheme::article_type);
  CHECK(c.classifiers[0].manifest == "/base/m.json");

  CHECK_THROWS_AS(ServiceConfig::from_json("{"), FormatError);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"prot": 1})"), FormatError);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"port": "x"})"), FormatError);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"default_k": 0})"), FormatError);
  CHECK_THROWS_AS(ServiceConfig::from_json(R"({"classifiers": [{"scheme": "colour", "weights": "a", "manifest": "b"}]})"),
                  FormatError);
  CHECK_THROWS_AS(load_service_config("/nonexistent/service.json"), IoError);
}

TEST_CASE("snapshot loading validates referenced files", "[service]") {
  auto config = fixture().config;
  CHECK_NOTHROW(load_snapshot(config));
  auto missing = config;
  missing.store = fixture().dir + "/absent.femb";
  CHECK_THROWS_AS(load_snapshot(missing), IoError);
  auto half = config;
  half.autoencoder.clear();
  CHECK_THROWS_AS(load_snapshot(half), ContractError);
  auto wrong = config;
  wrong.classifiers[0].manifest = fixture().dir + "/sub.json";
  wrong.classifiers[0].weights = fixture().dir + "/article_head.fnnw";
  CHECK_NOTHROW(load_snapshot(wrong));  // both have three classes
}

TEST_CASE("search handler returns the uploaded product first", "[service]") {
  SearchService service(fixture().config);
  const auto id = fixture().catalog.ids[7];
  const auto response = service.search(catalog_image(id), std::nullopt);
  REQUIRE(response.status == 200);
  const auto body = json::parse(response.body);
  CHECK(body["k"] == 5);
  REQUIRE(body["hits"].size() == 5);
  CHECK(body["hits"][0]["id"] == id);
  CHECK(body["hits"][0]["score"].get<double>() >= 0.999);
  CHECK(body["hits"][0]["article_type"] == "Casual Shoes");
  CHECK(body["hits"][0]["image_url"] == "/api/products/" + std::to_string(id) + "/image");
  for (std::size_t i = 1; i < 5; ++i) CHECK(body["hits"][i - 1]["score"] >= body["hits"][i]["score"]);

  // Ordering matches the store exactly.
  const auto snap = service.snapshot();
  const auto direct = search_image(*snap->autoencoder, *snap->store, catalog_image(id), 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(body["hits"][i]["id"] == direct[i].id);

  CHECK(service.search(catalog_image(id), std::nullopt).body == response.body);
  CHECK(json::parse(service.search(catalog_image(id), "3").body)["hits"].size() == 3);
}

TEST_CASE("external query images return k finite hits", "[service]") {
  SearchService service(fixture().config);
  Rng rng(99);
  const auto query = encode_jpeg(synthetic_product_image(4, rng, 120, 90));
  const auto body = json::parse(service.search(query, "4").body);
  REQUIRE(body["hits"].size() == 4);
  for (const auto& hit : body["hits"]) CHECK(std::isfinite(hit["score"].get<double>()));
}

TEST_CASE("search handler errors", "[service]") {
  SearchService service(fixture().config);
  const auto image = catalog_image(fixture().catalog.ids[0]);
  CHECK(service.search(std::vector<std::uint8_t>{1, 2, 3, 4, 5}, std::nullopt).status == 422);
  CHECK(json::parse(service.search(std::vector<std::uint8_t>{0xFF, 0xD8, 0, 0}, std::nullopt).body)["error"]["code"] ==
        "undecodable_image");
  CHECK(service.search({}, std::nullopt).status == 400);
  CHECK(service.search(image, "0").status == 400);
  CHECK(service.search(image, "abc").status == 400);
  CHECK(service.search(image, "101").status == 400);

  auto small = fixture().config;
  small.max_upload_bytes = 100;
  SearchService tight(small);
  CHECK(tight.search(image, std::nullopt).status == 413);

  ServiceConfig empty;
  SearchService unloaded(empty);
  CHECK(unloaded.search(image, std::nullopt).status == 503);
  CHECK(unloaded.health().status == 503);
}

TEST_CASE("classify handler", "[service]") {
  SearchService service(fixture().config);
  const auto image = catalog_image(fixture().catalog.ids[0]);
  for (const std::string scheme : {"article-type", "sub-category"}) {
    const auto response = service.classify(image, scheme);
    REQUIRE(response.status == 200);
    const auto body = json::parse(response.body);
    double sum = 0.0;
    std::vector<std::string> labels;
    for (const auto& p : body["probabilities"]) {
      sum += p["probability"].get<double>();
      CHECK(p["probability"].get<double>() >= 0.0);
      labels.push_back(p["label"]);
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    CHECK(std::find(labels.begin(), labels.end(), body["label"].get<std::string>()) != labels.end());
    CHECK(service.classify(image, scheme).body == response.body);
  }
  CHECK(service.classify(image, "gender-master").status == 409);
  CHECK(service.classify(image, "colour").status == 400);
  CHECK(service.classify(std::vector<std::uint8_t>{1, 2, 3}, "article-type").status == 422);
}

TEST_CASE("product handlers", "[service]") {
  SearchService service(fixture().config);
  const auto id = fixture().catalog.ids[2];
  const auto meta = service.product(std::to_string(id));
  REQUIRE(meta.status == 200);
  const auto body = json::parse(meta.body);
  CHECK(body["id"] == id);
  for (const char* key : {"gender", "master_category", "sub_category", "article_type", "display_name"}) {
    CHECK(!body[key].get<std::string>().empty());
  }
  CHECK(service.product("424242").status == 404);
  CHECK(service.product("abc").status == 400);
  const auto image = service.product_image(std::to_string(id));
  CHECK(image.status == 200);
  CHECK(image.content_type == "image/jpeg");
  CHECK(image.body == as_string(catalog_image(id)));
  CHECK(service.product_image("424242").status == 404);
  const auto health = json::parse(service.health().body);
  CHECK(health["status"] == "ok");
  CHECK(health["store_size"] == fixture().catalog.ids.size());
}

TEST_CASE("reload swaps the snapshot", "[service]") {
  SearchService service(fixture().config);
  const auto before = service.snapshot();
  const auto ok = service.reload();
  CHECK(ok.status == 200);
  CHECK(service.snapshot() != before);
  CHECK(service.snapshot()->store->size() == before->store->size());

  auto broken_config = fixture().config;
  broken_config.store = fixture().dir + "/absent.femb";
  SearchService broken(broken_config, before);
  const auto failed = broken.reload();
  CHECK(failed.status == 500);
  CHECK(broken.snapshot() == before);
}

TEST_CASE("live HTTP API", "[service]") {
  LiveServer server(fixture().config);
  auto client = server.client();
  const auto id = fixture().catalog.ids[11];
  const auto image = as_string(catalog_image(id));

  const httplib::MultipartFormDataItems upload{{"image", image, "query.jpg", "image/jpeg"}};
  const auto first = client.Post("/api/search", upload);
  REQUIRE(first);
  CHECK(first->status == 200);
  CHECK(first->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto body = json::parse(first->body);
  CHECK(body["hits"].size() == 5);
  CHECK(body["hits"][0]["id"] == id);
  CHECK(body["hits"][0]["score"].get<double>() >= 0.999);
  const auto second = client.Post("/api/search", upload);
  REQUIRE(second);
  CHECK(second->body == first->body);

  const httplib::MultipartFormDataItems with_k{{"image", image, "query.jpg", "image/jpeg"}, {"k", "2", "", ""}};
  CHECK(json::parse(client.Post("/api/search", with_k)->body)["hits"].size() == 2);
  CHECK(json::parse(client.Post("/api/search?k=3", upload)->body)["hits"].size() == 3);

  const httplib::MultipartFormDataItems junk{{"image", "not an image", "x.jpg", "image/jpeg"}};
  CHECK(client.Post("/api/search", junk)->status == 422);
  CHECK(client.Post("/api/search", httplib::MultipartFormDataItems{})->status == 400);

  const httplib::MultipartFormDataItems classify{{"image", image, "q.jpg", "image/jpeg"}, {"scheme", "article-type", "", ""}};
  const auto cls = client.Post("/api/classify", classify);
  REQUIRE(cls);
  CHECK(cls->status == 200);
  CHECK(json::parse(cls->body)["probabilities"].size() == 3);
  const httplib::MultipartFormDataItems no_model{{"image", image, "q.jpg", "image/jpeg"}, {"scheme", "gender-master", "", ""}};
  CHECK(client.Post("/api/classify", no_model)->status == 409);

  const auto meta = client.Get("/api/products/" + std::to_string(id));
  REQUIRE(meta);
  CHECK(meta->status == 200);
  CHECK(json::parse(meta->body)["article_type"] == "Casual Shoes");
  const auto img = client.Get("/api/products/" + std::to_string(id) + "/image");
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/jpeg");
  CHECK(img->body == image);
  CHECK(client.Get("/api/products/999999")->status == 404);
  const auto unknown_route = client.Get("/api/nothing");
  CHECK(unknown_route->status == 404);
  CHECK(json::parse(unknown_route->body)["error"]["code"] == "not_found");

  const auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");
  CHECK(client.Post("/api/admin/reload")->status == 200);
  const auto preflight = client.Options("/api/search");
  CHECK(preflight->status == 204);

  // One JSON log line per request with path, status and latency.
  server.shutdown();
  std::istringstream log(server.log.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto entry = json::parse(line);
    CHECK(entry.contains("path"));
    CHECK(entry.contains("status"));
    CHECK(entry["latency_ms"].get<double>() >= 0.0);
    ++lines;
  }
  CHECK(lines >= 15);
}

TEST_CASE("oversize uploads get 413 over HTTP", "[service]") {
  auto config = fixture().config;
  config.max_upload_bytes = 1000;
  LiveServer server(config);
  auto client = server.client();
  const httplib::MultipartFormDataItems upload{
      {"image", as_string(catalog_image(fixture().catalog.ids[0])), "q.jpg", "image/jpeg"}};
  const auto res = client.Post("/api/search", upload);
  REQUIRE(res);
  CHECK(res->status == 413);
  const httplib::MultipartFormDataItems huge{{"image", std::string(3 * 1024 * 1024, 'x'), "q.jpg", "image/jpeg"}};
  const auto res2 = client.Post("/api/search", huge);
  REQUIRE(res2);
  CHECK(res2->status == 413);
}
