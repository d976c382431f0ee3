#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stylesearch {

// dot(a, b) / (|a| |b|) accumulated in double; 0 when either norm is below
// 1e-12. Throws ShapeError on a length mismatch.
double cosine(std::span<const float> a, std::span<const float> b);

struct SimilarityHit {
  std::uint64_t id = 0;
  double score = 0.0;
  friend bool operator==(const SimilarityHit&, const SimilarityHit&) = default;
};

// Exact cosine search over id-keyed vectors kept in insertion order, with
// cached norms. The first add fixes the dimension unless one is given.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  // Re-adding an id replaces its vector in place. Throws ShapeError on a
  // dimension mismatch and ContractError on non-finite values.
  void add(std::uint64_t id, std::span<const float> values);

  bool contains(std::uint64_t id) const { return index_.count(id) > 0; }
  // Throws LookupError for unknown ids.
  std::span<const float> vector(std::uint64_t id) const;

  const std::vector<std::uint64_t>& ids() const { return ids_; }
  std::span<const float> vector_at(std::size_t position) const;
  double norm_at(std::size_t position) const { return norms_[position]; }

  // The min(k, size) best hits, by descending score then ascending id.
  // Throws ContractError for k = 0 and ShapeError for a wrong-length query
  // (unless the store is empty).
  std::vector<SimilarityHit> top_k(std::span<const float> query, std::size_t k = 5) const;

 private:
  std::size_t dimension_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<float> values_;
  std::vector<double> norms_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// FEMB layout, little-endian: "FEMB", u32 version (1), u32 dimension,
// u64 count, then count records of (u64 id, dimension x f32).
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
// Throws FormatError (with byte offset) on bad magic/version, truncation,
// trailing bytes or duplicate ids.
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes);

void save_store(const EmbeddingStore& store, const std::string& path);
EmbeddingStore load_store(const std::string& path);
// load_store plus a dimension check (FormatError on mismatch).
EmbeddingStore import_embeddings(const std::string& path,
                                 std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace stylesearch
