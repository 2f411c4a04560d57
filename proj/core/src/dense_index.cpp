#include "slotfill/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "slotfill/error.hpp"
#include "slotfill/parallel.hpp"

namespace slotfill {

namespace {

constexpr std::string_view kMagic = "DVEC";
constexpr std::uint32_t kVersion = 1;

float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

float sim(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError(a.size(), b.size());
  return dot(a.data(), b.data(), a.size());
}

void VectorIndex::add(std::span<const std::string> ids, std::span<const DenseVector> vectors) {
  if (ids.size() != vectors.size()) {
    throw DataError("add_vectors: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(vectors.size()) + " vectors");
  }
  std::unordered_set<std::string_view> batch;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (vectors[i].size() != dimension_) throw DimensionError(dimension_, vectors[i].size());
    if (!std::all_of(vectors[i].begin(), vectors[i].end(), [](float v) { return std::isfinite(v); })) {
      throw DataError("non-finite entry in vector for " + ids[i]);
    }
    if (row_by_id_.contains(ids[i]) || !batch.insert(ids[i]).second) throw DuplicateIdError(ids[i]);
  }
  matrix_.reserve(matrix_.size() + ids.size() * dimension_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    row_by_id_.emplace(ids[i], ids_.size());
    ids_.push_back(ids[i]);
    matrix_.insert(matrix_.end(), vectors[i].begin(), vectors[i].end());
  }
}

ResultList VectorIndex::search(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (query.size() != dimension_) throw DimensionError(dimension_, query.size());

  std::vector<float> scores(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    scores[r] = dot(query.data(), matrix_.data() + r * dimension_, dimension_);
  }
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids_[a] < ids_[b];
                    });
  ResultList results;
  results.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    results.push_back(ScoredPassage{ids_[order[i]], static_cast<double>(scores[order[i]]), i + 1});
  }
  return results;
}

std::vector<ResultList> VectorIndex::search_batch(std::span<const DenseVector> queries, std::size_t k,
                                                  std::size_t threads) const {
  std::vector<ResultList> results(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { results[i] = search(queries[i], k); });
  return results;
}

std::filesystem::path VectorIndex::ids_path_for(const std::filesystem::path& path) {
  auto ids = path;
  ids += ".ids";
  return ids;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  {
    detail::BinaryWriter w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(dimension_));
    w.u64(ids_.size());
    w.f32s(matrix_);
    w.finish();
  }
  std::ofstream ids(ids_path_for(path), std::ios::binary);
  if (!ids) throw DataError("cannot write " + ids_path_for(path).string());
  for (const auto& id : ids_) ids << id << '\n';
  if (!ids) throw DataError("write failed: " + ids_path_for(path).string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  r.expect_version(kVersion);
  const std::uint32_t dimension = r.u32();
  const std::uint64_t count = r.u64();
  std::vector<float> matrix(count * dimension);
  r.f32s(matrix);
  r.expect_end();

  std::vector<std::string> ids;
  std::ifstream in(ids_path_for(path), std::ios::binary);
  if (!in) throw DataError("missing id sidecar " + ids_path_for(path).string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  if (ids.size() != count) {
    throw DataError(ids_path_for(path).string() + ": " + std::to_string(ids.size()) +
                    " ids for " + std::to_string(count) + " vectors");
  }

  VectorIndex index(dimension);
  std::vector<DenseVector> rows(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    rows[i].assign(matrix.begin() + static_cast<std::ptrdiff_t>(i * dimension),
                   matrix.begin() + static_cast<std::ptrdiff_t>((i + 1) * dimension));
  }
  index.add(ids, rows);
  return index;
}

}  // namespace slotfill
