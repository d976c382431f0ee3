#include "stylesearch/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "binary_io.hpp"
#include "stylesearch/errors.hpp"

namespace stylesearch {
namespace {

constexpr char kMagic[5] = "FEMB";
constexpr double kZeroNorm = 1e-12;

double norm_of(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * b[i];
  return sum;
}

double score(double dot_product, double na, double nb) {
  if (na < kZeroNorm || nb < kZeroNorm) return 0.0;
  return std::clamp(dot_product / (na * nb), -1.0, 1.0);
}

// True when a ranks before b.
bool ranks_before(const SimilarityHit& a, const SimilarityHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  return score(dot(a, b), norm_of(a), norm_of(b));
}

void EmbeddingStore::add(std::uint64_t id, std::span<const float> values) {
  if (dimension_ == 0) {
    if (values.empty()) throw ShapeError("EmbeddingStore: vectors must be non-empty");
    dimension_ = values.size();
  }
  if (values.size() != dimension_) {
    throw ShapeError("EmbeddingStore: expected dimension " + std::to_string(dimension_) + ", got " +
                     std::to_string(values.size()));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw ContractError("EmbeddingStore: non-finite value for id " + std::to_string(id));
  }
  const auto found = index_.find(id);
  if (found != index_.end()) {
    std::copy(values.begin(), values.end(), values_.begin() + found->second * dimension_);
    norms_[found->second] = norm_of(values);
    return;
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  values_.insert(values_.end(), values.begin(), values.end());
  norms_.push_back(norm_of(values));
}

std::span<const float> EmbeddingStore::vector(std::uint64_t id) const {
  const auto found = index_.find(id);
  if (found == index_.end()) throw LookupError("no embedding for id " + std::to_string(id));
  return vector_at(found->second);
}

std::span<const float> EmbeddingStore::vector_at(std::size_t position) const {
  return std::span<const float>(values_).subspan(position * dimension_, dimension_);
}

std::vector<SimilarityHit> EmbeddingStore::top_k(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw ContractError("top_k: k must be at least 1");
  if (ids_.empty()) return {};
  if (query.size() != dimension_) {
    throw ShapeError("top_k: query dimension " + std::to_string(query.size()) + ", store dimension " +
                     std::to_string(dimension_));
  }
  const double qn = norm_of(query);
  // Min-heap on rank: the top element is the worst hit kept so far.
  auto worse_on_top = [](const SimilarityHit& a, const SimilarityHit& b) { return ranks_before(a, b); };
  std::priority_queue<SimilarityHit, std::vector<SimilarityHit>, decltype(worse_on_top)> heap(worse_on_top);
  const std::size_t keep = std::min(k, ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const SimilarityHit hit{ids_[i], score(dot(query, vector_at(i)), qn, norms_[i])};
    if (heap.size() < keep) {
      heap.push(hit);
    } else if (ranks_before(hit, heap.top())) {
      heap.pop();
      heap.push(hit);
    }
  }
  std::vector<SimilarityHit> hits;
  hits.reserve(heap.size());
  while (!heap.empty()) {
    hits.push_back(heap.top());
    heap.pop();
  }
  std::reverse(hits.begin(), hits.end());
  return hits;
}

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
  detail::ByteWriter out;
  out.bytes(kMagic, 4);
  out.u32(kEmbeddingFormatVersion);
  out.u32(static_cast<std::uint32_t>(store.dimension()));
  out.u64(store.size());
  out.buffer().reserve(20 + store.size() * (8 + 4 * store.dimension()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    out.u64(store.ids()[i]);
    out.f32s(store.vector_at(i));
  }
  return std::move(out.buffer());
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "FEMB");
  in.expect_magic(kMagic);
  const std::size_t version_at = in.offset();
  const auto version = in.u32("version");
  if (version != kEmbeddingFormatVersion) in.fail("unsupported version " + std::to_string(version), version_at);
  const std::size_t dim_at = in.offset();
  const auto dimension = in.u32("dimension");
  const std::size_t count_at = in.offset();
  const auto count = in.u64("entry count");
  if (dimension == 0 && count > 0) in.fail("zero dimension with entries present", dim_at);
  const std::uint64_t record = 8 + 4 * static_cast<std::uint64_t>(dimension);
  if (count > 0 && count > in.remaining() / record) {
    in.fail("entry count " + std::to_string(count) + " exceeds the remaining " +
                std::to_string(in.remaining()) + " bytes",
            count_at);
  }
  EmbeddingStore store(dimension);
  std::vector<float> values(dimension);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t id_at = in.offset();
    const auto id = in.u64("id");
    in.f32s(values, "vector");
    if (store.contains(id)) in.fail("duplicate id " + std::to_string(id), id_at);
    for (float v : values) {
      if (!std::isfinite(v)) in.fail("non-finite value for id " + std::to_string(id), id_at);
    }
    store.add(id, values);
  }
  if (in.remaining() != 0) in.fail("trailing bytes after last entry", in.offset());
  return store;
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  detail::write_file_bytes(path, serialize_store(store));
}

EmbeddingStore load_store(const std::string& path) {
  return deserialize_store(detail::read_file_bytes(path));
}

EmbeddingStore import_embeddings(const std::string& path, std::optional<std::size_t> expected_dim) {
  EmbeddingStore store = load_store(path);
  if (expected_dim && store.dimension() != *expected_dim) {
    throw FormatError("embedding file '" + path + "' has dimension " + std::to_string(store.dimension()) +
                          ", expected " + std::to_string(*expected_dim),
                      12);
  }
  return store;
}

}  // namespace stylesearch
