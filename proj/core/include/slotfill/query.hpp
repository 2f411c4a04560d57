#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace slotfill {

inline constexpr std::string_view kSeparator = " [SEP] ";

enum class Split { kTrain, kDev, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<std::string> passage_id;
  std::optional<Split> split;
};

/// A head entity and relation with the tails that fill the slot.
struct SlotQuery {
  std::string query_id;
  std::string head;
  std::string relation;
  std::string rendered;  // head + " [SEP] " + relation
  std::set<std::string> gold_tails;
  std::set<std::string> gold_passage_ids;

  bool operator==(const SlotQuery&) const = default;
};

/// "head [SEP] relation".
std::string render_query(std::string_view head, std::string_view relation);

/// Stable id: hex FNV-1a of normalized head and normalized relation.
std::string make_query_id(std::string_view head, std::string_view relation);

/// Builds a SlotQuery carrying the triple's tail and provenance. Throws
/// DataError when head, relation or tail is empty.
SlotQuery triple_to_query(const Triple& triple);

/// A query with no gold tails, as issued at inference time.
SlotQuery make_query(std::string_view head, std::string_view relation);

/// Groups triples by (normalized head, normalized relation). Output is
/// sorted by query_id; rendering uses the first triple seen for each group.
std::vector<SlotQuery> dedup_queries(const std::vector<Triple>& triples);

}  // namespace slotfill
