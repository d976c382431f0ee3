#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace stylesearch {

// One row of the catalog metadata (styles.csv).
struct ProductRecord {
  std::uint64_t id = 0;
  std::string gender;
  std::string master_category;
  std::string sub_category;
  std::string article_type;
  std::string base_colour;
  std::string season;
  std::string year;
  std::string usage;
  std::string display_name;

  friend bool operator==(const ProductRecord&, const ProductRecord&) = default;
};

enum class LabelScheme { gender_master, sub_category, article_type };

// "gender-master", "sub-category", "article-type" (case-insensitive; the
// camel-case spellings GenderMaster/SubCategory/ArticleType also parse).
LabelScheme parse_label_scheme(const std::string& name);
std::string to_string(LabelScheme scheme);

// GenderMaster labels are gender + "-" + master category.
std::string label_of(const ProductRecord& record, LabelScheme scheme);

struct MetadataLoad {
  std::vector<ProductRecord> records;
  // Rows with the wrong field count, a non-numeric id, or a repeated id.
  std::size_t skipped_rows = 0;
};

// Reads styles.csv. Requires the id, gender, masterCategory, subCategory and
// articleType columns; the rest are optional.
MetadataLoad load_metadata(const std::string& csv_path);
MetadataLoad parse_metadata(std::istream& in);

// Keeps records that have "{id}.jpg" in image_dir, preserving order.
std::vector<ProductRecord> match_images(std::span<const ProductRecord> records,
                                        const std::string& image_dir);

std::map<std::string, std::size_t> class_counts(std::span<const ProductRecord> records,
                                                LabelScheme scheme);

struct FilterResult {
  std::vector<ProductRecord> records;
  // Retained labels in lexicographic order.
  std::vector<std::string> vocabulary;
};

// Drops classes with fewer than min_count records. Records with an empty
// label never form a class.
FilterResult filter_min_class(std::span<const ProductRecord> records, LabelScheme scheme,
                              std::size_t min_count = 500);

struct Splits {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> validation;
  std::vector<std::uint64_t> test;
  friend bool operator==(const Splits&, const Splits&) = default;
};

struct SplitOptions {
  double test_fraction = 0.2;
  double val_fraction_of_train = 0.2;
  std::uint64_t seed = 42;
};

// Stratified per class: ids of each class are sorted, shuffled with the
// seed, then test = round(n * test_fraction), validation =
// round((n - test) * val_fraction_of_train), the rest train. Each split gets
// at least one record per class. Split id lists are returned sorted.
Splits split_dataset(std::span<const ProductRecord> records, LabelScheme scheme,
                     const SplitOptions& options = {});

}  // namespace stylesearch
