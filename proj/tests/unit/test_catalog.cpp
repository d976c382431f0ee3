#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stylesearch/catalog.hpp"
#include "stylesearch/errors.hpp"
#include "stylesearch/manifest.hpp"
#include "stylesearch/rng.hpp"
#include "stylesearch/synthetic.hpp"

using namespace stylesearch;
namespace fs = std::filesystem;

namespace {

const char* kHeader =
    "id,gender,masterCategory,subCategory,articleType,baseColour,season,year,usage,productDisplayName\n";

ProductRecord record(std::uint64_t id, std::string article, std::string sub = "Sub",
                     std::string gender = "Men", std::string master = "Apparel") {
  ProductRecord r;
  r.id = id;
  r.gender = std::move(gender);
  r.master_category = std::move(master);
  r.sub_category = std::move(sub);
  r.article_type = std::move(article);
  return r;
}

std::vector<ProductRecord> make_classes(const std::vector<std::pair<std::string, std::size_t>>& sizes) {
  std::vector<ProductRecord> out;
  std::uint64_t id = 1;
  for (const auto& [label, n] : sizes) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(record(id++, label));
  }
  return out;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("stylesearch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("label schemes", "[dataset]") {
  const auto r = record(7, "Watches", "Watches", "Women", "Accessories");
  CHECK(label_of(r, LabelScheme::gender_master) == "Women-Accessories");
  CHECK(label_of(r, LabelScheme::sub_category) == "Watches");
  CHECK(label_of(r, LabelScheme::article_type) == "Watches");
  CHECK(parse_label_scheme("ArticleType") == LabelScheme::article_type);
  CHECK(parse_label_scheme("sub-category") == LabelScheme::sub_category);
  CHECK(parse_label_scheme("gender_master") == LabelScheme::gender_master);
  CHECK(to_string(LabelScheme::gender_master) == "gender-master");
  CHECK_THROWS_AS(parse_label_scheme("colour"), ContractError);
}

TEST_CASE("metadata parsing skips ragged rows", "[dataset]") {
  std::istringstream in(std::string(kHeader) +
                        "15970,Men,Apparel,Topwear,Shirts,Navy Blue,Fall,2011,Casual,Turtle Check Men Navy Blue Shirt\n"
                        "39386,Men,Apparel,Bottomwear,Jeans,Blue,Summer,2012,Casual,Peter England, Men Jeans\n");
  const auto load = parse_metadata(in);
  REQUIRE(load.records.size() == 1);
  CHECK(load.skipped_rows == 1);
  CHECK(load.records[0].id == 15970);
  CHECK(load.records[0].article_type == "Shirts");
  CHECK(load.records[0].display_name == "Turtle Check Men Navy Blue Shirt");
}

TEST_CASE("metadata edge cases", "[dataset]") {
  SECTION("header only") {
    std::istringstream in(kHeader);
    const auto load = parse_metadata(in);
    CHECK(load.records.empty());
    CHECK(load.skipped_rows == 0);
  }
  SECTION("quoted commas, CRLF and BOM") {
    std::istringstream in("\xEF\xBB\xBF" + std::string(kHeader).substr(0, std::string(kHeader).size() - 1) +
                          "\r\n1,Men,Apparel,Topwear,Tshirts,Red,Fall,2011,Casual,\"A, quoted\"\r\n");
    const auto load = parse_metadata(in);
    REQUIRE(load.records.size() == 1);
    CHECK(load.records[0].display_name == "A, quoted");
    CHECK(load.records[0].id == 1);
  }
  SECTION("bad and duplicate ids are skipped") {
    std::istringstream in(std::string(kHeader) + "x,Men,Apparel,Topwear,Tshirts,,,,,\n" +
                          "0,Men,Apparel,Topwear,Tshirts,,,,,\n" + "5,Men,Apparel,Topwear,Tshirts,,,,,\n" +
                          "5,Men,Apparel,Topwear,Shirts,,,,,\n");
    const auto load = parse_metadata(in);
    CHECK(load.records.size() == 1);
    CHECK(load.skipped_rows == 3);
  }
  SECTION("missing required column") {
    std::istringstream in("id,gender,subCategory,articleType\n1,Men,Topwear,Tshirts\n");
    CHECK_THROWS_AS(parse_metadata(in), FormatError);
  }
  SECTION("missing file") { CHECK_THROWS_AS(load_metadata("/nonexistent/styles.csv"), IoError); }
}

TEST_CASE("match_images keeps records with a jpg", "[dataset]") {
  const auto dir = scratch_dir("match");
  std::ofstream(dir / "1.jpg") << "x";
  std::ofstream(dir / "3.png") << "x";
  const std::vector<ProductRecord> records{record(1, "A"), record(2, "A"), record(3, "A")};
  const auto kept = match_images(records, dir.string());
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == 1);

  const auto empty = scratch_dir("match_empty");
  CHECK(match_images(records, empty.string()).empty());
  CHECK_THROWS_AS(match_images(records, (dir / "missing").string()), IoError);
}

TEST_CASE("filter_min_class", "[dataset]") {
  const auto records = make_classes({{"Casual Shoes", 12}, {"Wristbands", 3}, {"Bags", 5}});
  SECTION("threshold removes small classes") {
    const auto result = filter_min_class(records, LabelScheme::article_type, 5);
    CHECK(result.vocabulary == std::vector<std::string>{"Bags", "Casual Shoes"});
    CHECK(result.records.size() == 17);
  }
  SECTION("min_count 0 is the identity") {
    const auto result = filter_min_class(records, LabelScheme::article_type, 0);
    CHECK(result.records == records);
    CHECK(result.vocabulary.size() == 3);
  }
  SECTION("properties") {
    Rng rng(3);
    std::size_t previous_classes = 1000;
    for (std::size_t min_count : {0u, 1u, 3u, 4u, 5u, 6u, 12u, 13u}) {
      const auto result = filter_min_class(records, LabelScheme::article_type, min_count);
      const auto counts = class_counts(result.records, LabelScheme::article_type);
      std::size_t total = 0;
      for (const auto& [label, n] : counts) {
        CHECK(n >= min_count);
        total += n;
      }
      CHECK(total == result.records.size());
      CHECK(result.vocabulary.size() <= previous_classes);
      previous_classes = result.vocabulary.size();

      auto shuffled = records;
      fisher_yates(shuffled.begin(), shuffled.end(), rng);
      const auto again = filter_min_class(shuffled, LabelScheme::article_type, min_count);
      CHECK(again.vocabulary == result.vocabulary);
      std::set<std::uint64_t> a, b;
      for (const auto& r : result.records) a.insert(r.id);
      for (const auto& r : again.records) b.insert(r.id);
      CHECK(a == b);
    }
  }
  SECTION("empty labels never form a class") {
    auto withblank = records;
    withblank.push_back(record(99, ""));
    const auto result = filter_min_class(withblank, LabelScheme::article_type, 0);
    CHECK(result.records.size() == records.size());
  }
}

TEST_CASE("split_dataset rounding and partition", "[dataset]") {
  SECTION("one class of 100") {
    const auto records = make_classes({{"A", 100}});
    const auto splits = split_dataset(records, LabelScheme::article_type);
    CHECK(splits.test.size() == 20);
    CHECK(splits.validation.size() == 16);
    CHECK(splits.train.size() == 64);
  }
  SECTION("partition, stratification and determinism") {
    const auto records = make_classes({{"A", 10}, {"B", 10}, {"C", 37}, {"D", 3}});
    const auto splits = split_dataset(records, LabelScheme::article_type, {0.2, 0.2, 7});
    const auto again = split_dataset(records, LabelScheme::article_type, {0.2, 0.2, 7});
    CHECK(splits.train == again.train);
    CHECK(splits.validation == again.validation);
    CHECK(splits.test == again.test);

    std::set<std::uint64_t> all;
    for (const auto* part : {&splits.train, &splits.validation, &splits.test}) {
      for (auto id : *part) CHECK(all.insert(id).second);
    }
    CHECK(all.size() == records.size());

    std::map<std::uint64_t, std::string> label;
    for (const auto& r : records) label[r.id] = r.article_type;
    for (const auto* part : {&splits.train, &splits.validation, &splits.test}) {
      std::set<std::string> classes;
      for (auto id : *part) classes.insert(label[id]);
      CHECK(classes.size() == 4);
    }
    const auto counts = class_counts(records, LabelScheme::article_type);
    for (const auto& [cls, n] : counts) {
      const auto in_test = std::count_if(splits.test.begin(), splits.test.end(),
                                         [&](std::uint64_t id) { return label[id] == cls; });
      CHECK(std::abs(static_cast<double>(in_test) - 0.2 * static_cast<double>(n)) <= 1.0);
    }

    const auto other = split_dataset(records, LabelScheme::article_type, {0.2, 0.2, 8});
    CHECK(other.test != splits.test);
  }
  SECTION("contract errors") {
    CHECK_THROWS_AS(split_dataset(make_classes({{"A", 10}, {"B", 2}}), LabelScheme::article_type),
                    ContractError);
    CHECK_THROWS_AS(split_dataset(make_classes({{"A", 10}}), LabelScheme::article_type, {0.0, 0.2, 1}),
                    ContractError);
    CHECK_THROWS_AS(split_dataset(make_classes({{"A", 10}}), LabelScheme::article_type, {0.2, 1.0, 1}),
                    ContractError);
  }
}

TEST_CASE("prepare_dataset and manifest round trip", "[dataset]") {
  const auto dir = scratch_dir("prep");
  const auto catalog = write_synthetic_catalog(
      dir.string(),
      {{"Men", "Accessories", "Watches", "Watches", 12},
       {"Men", "Footwear", "Shoes", "Casual Shoes", 10},
       {"Women", "Accessories", "Wristbands", "Wristbands", 2}},
      11, 1, 2);
  const auto report = prepare_dataset(catalog.styles_csv, catalog.image_dir, LabelScheme::article_type, 5, 42);
  CHECK(report.metadata_records == 24);
  CHECK(report.skipped_rows == 2);
  CHECK(report.matched_records == 23);
  CHECK(report.classes_before == 3);
  CHECK(report.classes_after == 2);
  CHECK(report.images_after == 22);
  const auto& m = report.manifest;
  CHECK(m.vocabulary == std::vector<std::string>{"Casual Shoes", "Watches"});
  CHECK(m.records.size() == 22);
  CHECK_NOTHROW(m.validate());
  CHECK(m.splits.train.size() + m.splits.validation.size() + m.splits.test.size() == 22);

  const auto path = (dir / "manifest.json").string();
  save_manifest(m, path);
  CHECK(load_manifest(path) == m);
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  CHECK(m.image_path(1000) == (fs::path(catalog.image_dir) / "1000.jpg").string());

  auto broken = m;
  broken.splits.test.push_back(broken.splits.train.front());
  CHECK_THROWS_AS(broken.validate(), ContractError);
  broken = m;
  broken.records[0].label = 5;
  CHECK_THROWS_AS(broken.validate(), ContractError);

  CHECK_THROWS_AS(manifest_from_json("{\"format\":\"other\"}"), FormatError);
  CHECK_THROWS_AS(manifest_from_json("not json"), FormatError);
  CHECK_THROWS_AS(load_manifest((dir / "absent.json").string()), IoError);
}
