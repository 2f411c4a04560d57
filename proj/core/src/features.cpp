#include "slotfill/features.hpp"

#include <algorithm>

#include "slotfill/text.hpp"

namespace slotfill {

SparseFeatures make_sparse(std::vector<std::pair<std::uint32_t, float>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseFeatures out;
  for (const auto& [index, weight] : entries) {
    if (!out.indices.empty() && out.indices.back() == index) {
      out.weights.back() += weight;
    } else {
      out.indices.push_back(index);
      out.weights.push_back(weight);
    }
  }
  return out;
}

std::uint32_t hashed_bucket(std::string_view prefix, std::string_view key, std::uint32_t dim) {
  return static_cast<std::uint32_t>(fnv1a64(key, fnv1a64(prefix)) % dim);
}

}  // namespace slotfill
