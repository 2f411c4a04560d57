#pragma once

/// \file dataset.hpp
/// \brief Turns relation records into slot-filling data: queries with
/// grouped tails, retriever triples with null and BM25 hard negatives,
/// reader span examples, query-level splits, and KILT-style export.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/query.hpp"
#include "slotfill/reader.hpp"

namespace slotfill {

/// One line of the normalized record TSV:
/// head<TAB>relation<TAB>tail<TAB>pos|neg<TAB>passage_id
struct RelationRecord {
  std::string head;
  std::string relation;
  std::string tail;
  bool positive = true;
  std::string passage_id;
};

std::vector<RelationRecord> read_relation_records(const std::filesystem::path& path);
void write_relation_records(std::span<const RelationRecord> records, const std::filesystem::path& path);

/// Source relation label -> relation string used in queries.
using RelationMap = std::map<std::string, std::string>;

/// TSV: source_relation<TAB>merged_relation.
RelationMap read_relation_map(const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DatasetConfig {
  RelationMap relation_map;
  std::size_t null_negatives_per_positive = 1;
  bool mine_hard_negatives = true;
  std::size_t hard_negative_pool = 100;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

struct SkipReport {
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> reasons;

  void add(const std::string& reason) {
    ++skipped;
    ++reasons[reason];
  }
  /// key=value lines: skipped_count, then reason.<name>=<count>.
  std::string to_text() const;
};

struct SlotFillDataset {
  std::vector<SlotQuery> queries;  // sorted by query_id
  std::vector<TrainingInstance> retriever_instances;
  std::vector<ReaderExample> reader_examples;
  std::map<Split, std::set<std::string>> splits;
  SkipReport skipped;

  Split split_of(const std::string& query_id) const;
  std::vector<SlotQuery> queries_in(Split split) const;
  std::vector<TrainingInstance> retriever_instances_in(Split split) const;
  std::vector<ReaderExample> reader_examples_in(Split split) const;
};

/// Builds retriever and reader data from relation records.
///
/// Positive records yield a (query, evidence passage) pair and a reader
/// example whose span is the first token-level occurrence of the tail in
/// the passage; records whose tail cannot be found, or whose passage is
/// unknown, are skipped and counted. Negative (null-relation) records
/// supply retriever negatives: first those of the same query, then those
/// from the same source document. When `index` is given, one BM25 hard
/// negative per query is added when one can be mined. Relations without a
/// relation_map entry raise DataError.
SlotFillDataset build_biosf(std::span<const RelationRecord> records, const PassageStore& passages,
                            const LexicalIndex* index, const DatasetConfig& config);

/// One JSON object per query:
///   {"id", "input": "<head> [SEP] <relation>",
///    "output": [{"answer": tail, "provenance": [{"passage_id": ...}]}]}
/// Every answer lists all of the query's gold passages as provenance.
void export_kilt(std::span<const SlotQuery> queries, const std::filesystem::path& path);

/// Inverse of export_kilt. Malformed lines raise ParseError with the line
/// number.
std::vector<SlotQuery> import_kilt(const std::filesystem::path& path);

/// Retriever triples by passage reference:
///   {"query_id", "head", "relation", "positive", "negative"}
void write_retriever_instances(std::span<const TrainingInstance> instances, const std::filesystem::path& path);
std::vector<TrainingInstance> read_retriever_instances(const std::filesystem::path& path,
                                                       const PassageStore& passages);

/// Reader examples by passage reference:
///   {"example_id", "query_id", "query", "passage_id", "span": [start, end] | null, "answers": [...]}
void write_reader_examples(std::span<const ReaderExample> examples, const std::filesystem::path& path);
std::vector<ReaderExample> read_reader_examples(const std::filesystem::path& path, const PassageStore& passages);

}  // namespace slotfill
