#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace slotfill {

/// Sparse non-negative feature vector. Indices are unique and ascending.
struct SparseFeatures {
  std::vector<std::uint32_t> indices;
  std::vector<float> weights;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  bool operator==(const SparseFeatures&) const = default;
};

/// Sorts and merges (index, weight) pairs, summing weights of repeated
/// indices.
SparseFeatures make_sparse(std::vector<std::pair<std::uint32_t, float>> entries);

/// Bucket of a namespaced key: FNV-1a 64 over `prefix` followed by `key`,
/// reduced mod `dim`.
std::uint32_t hashed_bucket(std::string_view prefix, std::string_view key, std::uint32_t dim);

}  // namespace slotfill
