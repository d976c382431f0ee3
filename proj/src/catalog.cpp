#include "stylesearch/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <unordered_set>

#include "stylesearch/errors.hpp"
#include "stylesearch/rng.hpp"

namespace stylesearch {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::optional<std::uint64_t> parse_id(const std::string& text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || value == 0) return std::nullopt;
  return value;
}

}  // namespace

LabelScheme parse_label_scheme(const std::string& name) {
  const std::string n = lower(name);
  if (n == "gender-master" || n == "gendermaster" || n == "gender_master") {
    return LabelScheme::gender_master;
  }
  if (n == "sub-category" || n == "subcategory" || n == "sub_category") {
    return LabelScheme::sub_category;
  }
  if (n == "article-type" || n == "articletype" || n == "article_type") {
    return LabelScheme::article_type;
  }
  throw ContractError("unknown label scheme '" + name +
                      "' (expected gender-master, sub-category or article-type)");
}

std::string to_string(LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::gender_master:
      return "gender-master";
    case LabelScheme::sub_category:
      return "sub-category";
    case LabelScheme::article_type:
      return "article-type";
  }
  return "unknown";
}

std::string label_of(const ProductRecord& record, LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::gender_master:
      if (record.gender.empty() || record.master_category.empty()) return {};
      return record.gender + "-" + record.master_category;
    case LabelScheme::sub_category:
      return record.sub_category;
    case LabelScheme::article_type:
      return record.article_type;
  }
  return {};
}

MetadataLoad parse_metadata(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("metadata CSV has no header row", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  auto column = [&](const char* name, bool required) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw FormatError(std::string("metadata CSV lacks required column '") + name + "'", 1);
      return std::nullopt;
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_id = *column("id", true);
  const auto c_gender = *column("gender", true);
  const auto c_master = *column("masterCategory", true);
  const auto c_sub = *column("subCategory", true);
  const auto c_article = *column("articleType", true);
  const auto c_colour = column("baseColour", false);
  const auto c_season = column("season", false);
  const auto c_year = column("year", false);
  const auto c_usage = column("usage", false);
  const auto c_name = column("productDisplayName", false);

  MetadataLoad result;
  std::unordered_set<std::uint64_t> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ++result.skipped_rows;
      continue;
    }
    const auto id = parse_id(fields[c_id]);
    if (!id || !seen.insert(*id).second) {
      ++result.skipped_rows;
      continue;
    }
    auto opt = [&](const std::optional<std::size_t>& c) {
      return c ? std::move(fields[*c]) : std::string();
    };
    ProductRecord r;
    r.id = *id;
    r.gender = std::move(fields[c_gender]);
    r.master_category = std::move(fields[c_master]);
    r.sub_category = std::move(fields[c_sub]);
    r.article_type = std::move(fields[c_article]);
    r.base_colour = opt(c_colour);
    r.season = opt(c_season);
    r.year = opt(c_year);
    r.usage = opt(c_usage);
    r.display_name = opt(c_name);
    result.records.push_back(std::move(r));
  }
  return result;
}

MetadataLoad load_metadata(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open metadata CSV '" + csv_path + "'");
  return parse_metadata(in);
}

std::vector<ProductRecord> match_images(std::span<const ProductRecord> records,
                                        const std::string& image_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::directory_iterator it(image_dir, ec);
  if (ec) throw IoError("cannot read image directory '" + image_dir + "': " + ec.message());
  std::unordered_set<std::string> files;
  for (; it != fs::directory_iterator(); it.increment(ec)) {
    if (ec) throw IoError("error listing '" + image_dir + "': " + ec.message());
    files.insert(it->path().filename().string());
  }
  std::vector<ProductRecord> out;
  for (const auto& r : records) {
    if (files.count(std::to_string(r.id) + ".jpg")) out.push_back(r);
  }
  return out;
}

std::map<std::string, std::size_t> class_counts(std::span<const ProductRecord> records,
                                                LabelScheme scheme) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    auto label = label_of(r, scheme);
    if (!label.empty()) ++counts[std::move(label)];
  }
  return counts;
}

FilterResult filter_min_class(std::span<const ProductRecord> records, LabelScheme scheme,
                              std::size_t min_count) {
  const auto counts = class_counts(records, scheme);
  FilterResult result;
  for (const auto& [label, n] : counts) {
    if (n >= min_count) result.vocabulary.push_back(label);
  }
  for (const auto& r : records) {
    const auto label = label_of(r, scheme);
    if (label.empty()) continue;
    if (counts.at(label) >= min_count) result.records.push_back(r);
  }
  return result;
}

Splits split_dataset(std::span<const ProductRecord> records, LabelScheme scheme,
                     const SplitOptions& options) {
  auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_open_unit(options.test_fraction) || !in_open_unit(options.val_fraction_of_train)) {
    throw ContractError("split fractions must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::uint64_t>> by_class;
  for (const auto& r : records) {
    const auto label = label_of(r, scheme);
    if (label.empty()) throw ContractError("record " + std::to_string(r.id) + " has an empty label");
    by_class[label].push_back(r.id);
  }

  Rng rng(options.seed);
  Splits splits;
  for (auto& [label, ids] : by_class) {
    const std::size_t n = ids.size();
    if (n < 3) {
      throw ContractError("class '" + label + "' has " + std::to_string(n) +
                          " records; at least 3 are needed to populate every split");
    }
    std::sort(ids.begin(), ids.end());
    fisher_yates(ids.begin(), ids.end(), rng);
    const auto round_count = [](double x) { return static_cast<std::size_t>(std::llround(x)); };
    const std::size_t n_test = std::clamp<std::size_t>(
        round_count(static_cast<double>(n) * options.test_fraction), 1, n - 2);
    const std::size_t rest = n - n_test;
    const std::size_t n_val = std::clamp<std::size_t>(
        round_count(static_cast<double>(rest) * options.val_fraction_of_train), 1, rest - 1);
    splits.test.insert(splits.test.end(), ids.begin(), ids.begin() + static_cast<long>(n_test));
    splits.validation.insert(splits.validation.end(), ids.begin() + static_cast<long>(n_test),
                             ids.begin() + static_cast<long>(n_test + n_val));
    splits.train.insert(splits.train.end(), ids.begin() + static_cast<long>(n_test + n_val), ids.end());
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.validation.begin(), splits.validation.end());
  std::sort(splits.test.begin(), splits.test.end());
  return splits;
}

}  // namespace stylesearch
