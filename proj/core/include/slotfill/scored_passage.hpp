#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace slotfill {

/// One retrieval result. Within a list, scores are non-increasing and ranks
/// run 1, 2, 3, ...
struct ScoredPassage {
  std::string passage_id;
  double score = 0.0;
  std::size_t rank = 0;

  bool operator==(const ScoredPassage&) const = default;
};

using ResultList = std::vector<ScoredPassage>;

}  // namespace slotfill
