#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stylesearch/catalog.hpp"

namespace stylesearch {

struct LabeledId {
  std::uint64_t id = 0;
  // Index into DatasetManifest::vocabulary.
  std::size_t label = 0;
  friend bool operator==(const LabeledId&, const LabeledId&) = default;
};

// Everything needed to reproduce a prepared dataset. Serialized as JSON:
//   {"format": "stylesearch-manifest", "version": 1,
//    "scheme": "article-type", "min_count": 500, "seed": 42,
//    "styles_csv": "...", "image_dir": "...", "target_size": [64, 64],
//    "vocabulary": ["Backpacks", ...],
//    "records": [[id, label_index], ...],
//    "splits": {"train": [ids], "validation": [ids], "test": [ids]}}
struct DatasetManifest {
  LabelScheme scheme = LabelScheme::article_type;
  std::size_t min_count = 500;
  std::uint64_t seed = 42;
  std::string styles_csv;
  std::string image_dir;
  std::size_t target_height = 64;
  std::size_t target_width = 64;
  std::vector<std::string> vocabulary;
  std::vector<LabeledId> records;
  Splits splits;

  // Throws ContractError if labels fall outside the vocabulary or the splits
  // do not partition the record ids.
  void validate() const;
  std::map<std::uint64_t, std::size_t> label_map() const;
  std::string image_path(std::uint64_t id) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);
std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// Counts observed while preparing a dataset.
struct PrepReport {
  std::size_t metadata_records = 0;
  std::size_t skipped_rows = 0;
  std::size_t matched_records = 0;
  std::size_t classes_before = 0;
  std::size_t classes_after = 0;
  std::size_t images_after = 0;
  DatasetManifest manifest;
};

// load_metadata -> match_images -> filter_min_class -> split_dataset.
PrepReport prepare_dataset(const std::string& styles_csv, const std::string& image_dir,
                           LabelScheme scheme, std::size_t min_count, std::uint64_t seed);

}  // namespace stylesearch
