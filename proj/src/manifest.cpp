#include "stylesearch/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "stylesearch/errors.hpp"

namespace stylesearch {

using nlohmann::json;

void DatasetManifest::validate() const {
  std::set<std::uint64_t> ids;
  for (const auto& r : records) {
    if (r.label >= vocabulary.size()) {
      throw ContractError("manifest record " + std::to_string(r.id) + " has label index " +
                          std::to_string(r.label) + " outside the vocabulary");
    }
    if (!ids.insert(r.id).second) {
      throw ContractError("manifest lists record " + std::to_string(r.id) + " twice");
    }
  }
  std::set<std::uint64_t> seen;
  for (const auto* split : {&splits.train, &splits.validation, &splits.test}) {
    for (auto id : *split) {
      if (!ids.count(id)) throw ContractError("split id " + std::to_string(id) + " is not a record");
      if (!seen.insert(id).second) {
        throw ContractError("id " + std::to_string(id) + " appears in more than one split");
      }
    }
  }
  if (seen.size() != ids.size()) throw ContractError("splits do not cover every manifest record");
}

std::map<std::uint64_t, std::size_t> DatasetManifest::label_map() const {
  std::map<std::uint64_t, std::size_t> m;
  for (const auto& r : records) m.emplace(r.id, r.label);
  return m;
}

std::string DatasetManifest::image_path(std::uint64_t id) const {
  return (std::filesystem::path(image_dir) / (std::to_string(id) + ".jpg")).string();
}

std::string manifest_to_json(const DatasetManifest& m) {
  json records = json::array();
  for (const auto& r : m.records) records.push_back(json::array({r.id, r.label}));
  const json doc = {
      {"format", "stylesearch-manifest"},
      {"version", 1},
      {"scheme", to_string(m.scheme)},
      {"min_count", m.min_count},
      {"seed", m.seed},
      {"styles_csv", m.styles_csv},
      {"image_dir", m.image_dir},
      {"target_size", {m.target_height, m.target_width}},
      {"vocabulary", m.vocabulary},
      {"records", records},
      {"splits", {{"train", m.splits.train}, {"validation", m.splits.validation}, {"test", m.splits.test}}},
  };
  return doc.dump(1);
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", std::string()) != "stylesearch-manifest" || doc.value("version", 0) != 1) {
      throw FormatError("not a version 1 stylesearch manifest");
    }
    m.scheme = parse_label_scheme(doc.at("scheme").get<std::string>());
    m.min_count = doc.at("min_count").get<std::size_t>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.styles_csv = doc.value("styles_csv", std::string());
    m.image_dir = doc.at("image_dir").get<std::string>();
    const auto size = doc.at("target_size").get<std::vector<std::size_t>>();
    if (size.size() != 2) throw FormatError("target_size must have two entries");
    m.target_height = size[0];
    m.target_width = size[1];
    m.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& r : doc.at("records")) {
      m.records.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<std::size_t>()});
    }
    const auto& s = doc.at("splits");
    m.splits.train = s.at("train").get<std::vector<std::uint64_t>>();
    m.splits.validation = s.at("validation").get<std::vector<std::uint64_t>>();
    m.splits.test = s.at("test").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  try {
    m.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("inconsistent manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << manifest_to_json(manifest) << '\n';
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return manifest_from_json(buffer.str());
}

PrepReport prepare_dataset(const std::string& styles_csv, const std::string& image_dir,
                           LabelScheme scheme, std::size_t min_count, std::uint64_t seed) {
  PrepReport report;
  auto loaded = load_metadata(styles_csv);
  report.metadata_records = loaded.records.size();
  report.skipped_rows = loaded.skipped_rows;
  const auto matched = match_images(loaded.records, image_dir);
  report.matched_records = matched.size();
  report.classes_before = class_counts(matched, scheme).size();
  auto filtered = filter_min_class(matched, scheme, min_count);
  report.classes_after = filtered.vocabulary.size();
  report.images_after = filtered.records.size();

  DatasetManifest& m = report.manifest;
  m.scheme = scheme;
  m.min_count = min_count;
  m.seed = seed;
  m.styles_csv = styles_csv;
  m.image_dir = image_dir;
  m.vocabulary = filtered.vocabulary;
  for (const auto& r : filtered.records) {
    const auto label = label_of(r, scheme);
    const auto pos = std::lower_bound(m.vocabulary.begin(), m.vocabulary.end(), label);
    m.records.push_back({r.id, static_cast<std::size_t>(pos - m.vocabulary.begin())});
  }
  SplitOptions options;
  options.seed = seed;
  if (!filtered.records.empty()) m.splits = split_dataset(filtered.records, scheme, options);
  return report;
}

}  // namespace stylesearch
