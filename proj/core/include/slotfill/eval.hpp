#pragma once

/// \file eval.hpp
/// \brief Retrieval, reader and end-to-end metrics.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/query.hpp"
#include "slotfill/scored_passage.hpp"

namespace slotfill {

enum class HitMode { kAnswerContainment, kGoldPassageId };

HitMode parse_hit_mode(std::string_view name);
std::string_view hit_mode_name(HitMode mode);

struct QueryHitRecord {
  std::string query_id;
  std::size_t first_hit_rank = 0;  // 0 = no hit among the returned results
  bool excluded = false;
};

struct HitsReport {
  HitMode mode = HitMode::kAnswerContainment;
  std::vector<std::size_t> ks;
  std::vector<double> hits;  // aligned with ks
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // empty gold set under answer containment
  std::vector<QueryHitRecord> per_query;

  double at(std::size_t k) const;
};

/// Looks up passage text by id; returns nullptr for unknown ids.
using PassageTextLookup = std::function<const std::string*(const std::string&)>;

PassageTextLookup lookup_in(const PassageStore& store);

/// A query hits at k when one of its top-k passages satisfies the hit
/// predicate. `results[i]` belongs to `golds[i]`; each list must be sorted by
/// rank (std::invalid_argument otherwise).
HitsReport eval_hits_at_k(std::span<const ResultList> results, std::span<const SlotQuery> golds,
                          std::span<const std::size_t> ks, HitMode mode, const PassageTextLookup& passages);

double exact_match(std::string_view prediction, std::span<const std::string> golds);
double token_f1(std::string_view prediction, std::span<const std::string> golds);

struct ReaderMetrics {
  double exact_match = 0.0;
  double token_f1 = 0.0;
  std::size_t examples = 0;
};

/// One (top-ranked) prediction per example, "" when there is none.
ReaderMetrics eval_reader(std::span<const std::string> predictions,
                          std::span<const std::vector<std::string>> golds);

/// Sum over queries of |normalized extracted ∩ normalized gold| divided by
/// the total number of distinct normalized gold tails. Throws DataError when
/// there are no gold tails at all.
double eval_micro_recall(std::span<const std::set<std::string>> extracted,
                         std::span<const std::set<std::string>> golds);

/// All gold passages plus a seeded uniform sample (without replacement) of
/// the rest, in their original order. Throws DataError when target_size is
/// smaller than the gold set or a gold id is missing.
std::vector<Passage> build_subset_corpus(std::span<const Passage> passages,
                                         const std::set<std::string>& gold_passage_ids,
                                         std::size_t target_size, std::uint64_t seed);

/// Retrieval results, one line per query:
///   {"query_id", "results": [{"passage_id", "score", "rank"}]}
void write_retrieval_results(std::span<const SlotQuery> queries, std::span<const ResultList> results,
                             const std::filesystem::path& path);
std::map<std::string, ResultList> read_retrieval_results(const std::filesystem::path& path);

struct MetricLine {
  std::string name;
  double value = 0.0;
};

/// Collected metrics plus per-query detail, rendered as a text table or as
/// JSONL (one line per metric, then one per query record).
struct EvalReport {
  std::vector<MetricLine> metrics;
  std::vector<std::string> per_query_json;  // serialized JSON objects

  void add(std::string name, double value) { metrics.push_back({std::move(name), value}); }
  void add_hits(const HitsReport& hits, std::string_view prefix = "");

  std::string to_table() const;
  std::string to_jsonl() const;
};

}  // namespace slotfill
