#pragma once

/// \file dense_index.hpp
/// \brief Exact flat maximum-inner-product search.
///
/// Scores are raw inner products accumulated in float, left to right over
/// the dimension, so results are reproducible bit for bit.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slotfill/scored_passage.hpp"

namespace slotfill {

using DenseVector = std::vector<float>;

/// Plain dot product. Throws DimensionError on unequal lengths.
float sim(std::span<const float> a, std::span<const float> b);

class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension = 0) : dimension_(dimension) {}

  /// Appends rows in order. Throws DimensionError or DuplicateIdError and
  /// leaves the index unchanged on failure.
  void add(std::span<const std::string> ids, std::span<const DenseVector> vectors);

  /// Exact top-k by inner product, ties by ascending passage_id. Returns
  /// min(k, size()) results; negative scores are returned.
  ResultList search(std::span<const float> query, std::size_t k) const;

  /// Independent per-query searches sharded over `threads` workers.
  std::vector<ResultList> search_batch(std::span<const DenseVector> queries, std::size_t k,
                                       std::size_t threads = 1) const;

  /// Vector file: "DVEC", u32 version, u32 dimension, u64 count, then
  /// count*dimension little-endian f32. Passage ids go to a sidecar file
  /// (`ids_path_for(path)`), one per line, row-aligned.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);
  static std::filesystem::path ids_path_for(const std::filesystem::path& path);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return {matrix_.data() + i * dimension_, dimension_};
  }

 private:
  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<float> matrix_;  // row-major, one row per passage
  std::unordered_map<std::string, std::size_t> row_by_id_;
};

}  // namespace slotfill
