#include "slotfill/query.hpp"

#include <map>

#include "slotfill/error.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split: " + std::string(name));
}

std::string render_query(std::string_view head, std::string_view relation) {
  std::string out;
  out.reserve(head.size() + kSeparator.size() + relation.size());
  out += head;
  out += kSeparator;
  out += relation;
  return out;
}

std::string make_query_id(std::string_view head, std::string_view relation) {
  std::string key = normalize_answer(head);
  key.push_back('\t');
  key += normalize_answer(relation);
  return hex64(fnv1a64(key));
}

SlotQuery make_query(std::string_view head, std::string_view relation) {
  SlotQuery q;
  q.query_id = make_query_id(head, relation);
  q.head = std::string(head);
  q.relation = std::string(relation);
  q.rendered = render_query(head, relation);
  return q;
}

SlotQuery triple_to_query(const Triple& triple) {
  if (triple.head.empty() || triple.relation.empty() || triple.tail.empty()) {
    throw DataError("triple with empty field: (" + triple.head + ", " + triple.relation + ", " +
                    triple.tail + ")");
  }
  SlotQuery q = make_query(triple.head, triple.relation);
  q.gold_tails.insert(triple.tail);
  if (triple.passage_id) q.gold_passage_ids.insert(*triple.passage_id);
  return q;
}

std::vector<SlotQuery> dedup_queries(const std::vector<Triple>& triples) {
  std::map<std::string, SlotQuery> by_id;
  for (const auto& t : triples) {
    SlotQuery q = triple_to_query(t);
    auto [it, inserted] = by_id.try_emplace(q.query_id, q);
    if (!inserted) {
      it->second.gold_tails.insert(t.tail);
      if (t.passage_id) it->second.gold_passage_ids.insert(*t.passage_id);
    }
  }
  std::vector<SlotQuery> out;
  out.reserve(by_id.size());
  for (auto& [id, q] : by_id) out.push_back(std::move(q));
  return out;
}

}  // namespace slotfill
