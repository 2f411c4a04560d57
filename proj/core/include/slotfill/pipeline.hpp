#pragma once

/// \file pipeline.hpp
/// \brief Retrieve, read and link: end-to-end slot filling.
///
/// For each query the retriever returns the top-k passages, the span scorer
/// runs on every (query, passage) pair independently, answers are merged
/// across passages by normalized text (max score wins), then linked to the
/// alias table. Answers that do not link are dropped.
///
/// Thread-safety: all resources are read-only during a run, so queries can
/// be processed concurrently.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/error.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/query.hpp"
#include "slotfill/reader.hpp"

namespace slotfill {

/// Raised when a run is missing an index, parameter file or table.
class MissingResourceError : public ConfigError {
 public:
  explicit MissingResourceError(std::string resource)
      : ConfigError("required resource not loaded: " + resource), resource_(std::move(resource)) {}

  const std::string& resource() const noexcept { return resource_; }

 private:
  std::string resource_;
};

/// normalized alias -> entity id.
class AliasTable {
 public:
  /// Later entries for the same normalized alias replace earlier ones.
  void add(std::string_view alias, std::string entity_id);
  std::optional<std::string> find(std::string_view text) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// TSV: alias<TAB>entity_id.
  static AliasTable load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::string> entries_;
};

std::optional<std::string> link_answer(const SpanAnswer& span, const AliasTable& aliases);

struct LinkedAnswer {
  SpanAnswer span;
  std::string entity_id;
  std::string query_id;
};

enum class RetrieverKind { kLexical, kDense };

RetrieverKind parse_retriever_kind(std::string_view name);
std::string_view retriever_kind_name(RetrieverKind kind);

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual ResultList retrieve(const SlotQuery& query, std::size_t k) const = 0;
};

class LexicalRetriever final : public Retriever {
 public:
  /// Throws MissingResourceError for a null index.
  explicit LexicalRetriever(const LexicalIndex* index);
  ResultList retrieve(const SlotQuery& query, std::size_t k) const override;

 private:
  const LexicalIndex* index_;
};

class DenseRetriever final : public Retriever {
 public:
  /// Throws MissingResourceError for a null argument and ConfigError when
  /// the encoder output size differs from the index dimension.
  DenseRetriever(const EncoderParams* encoder, const VectorIndex* index);
  ResultList retrieve(const SlotQuery& query, std::size_t k) const override;

 private:
  const EncoderParams* encoder_;
  const VectorIndex* index_;
};

class SpanScorer {
 public:
  virtual ~SpanScorer() = default;
  virtual SpanScores score(const SlotQuery& query, const Passage& passage) const = 0;
};

class TrainedReader final : public SpanScorer {
 public:
  explicit TrainedReader(const ReaderParams* params);
  SpanScores score(const SlotQuery& query, const Passage& passage) const override;

 private:
  const ReaderParams* params_;
};

/// Precomputed scores, e.g. from a transformer reader, one JSON object per
/// line: {"query_id", "passage_id", "start_scores", "end_scores",
/// "null_score"}. Pairs without an entry yield no answers.
class ExternalSpanScores final : public SpanScorer {
 public:
  void add(std::string query_id, std::string passage_id, SpanScores scores);
  SpanScores score(const SlotQuery& query, const Passage& passage) const override;
  std::size_t size() const noexcept { return scores_.size(); }

  /// Throws ParseError on malformed lines and DataError when a score list
  /// does not match the passage length.
  static ExternalSpanScores load(const std::filesystem::path& path, const PassageStore& passages);

 private:
  std::map<std::pair<std::string, std::string>, SpanScores> scores_;
};

struct PipelineConfig {
  std::size_t k = 100;
  DecodeOptions decode;
  std::size_t threads = 1;
};

struct PipelineResources {
  const PassageStore* passages = nullptr;
  const Retriever* retriever = nullptr;
  const SpanScorer* reader = nullptr;
  const AliasTable* aliases = nullptr;
};

/// Merges per-passage answers by normalized text keeping the highest score
/// (ties: the first seen) and sorts by score descending (ties: normalized
/// text ascending). Answers that normalize to nothing are dropped.
std::vector<SpanAnswer> merge_answers(std::span<const SpanAnswer> answers);

/// merge_answers, then link; unlinkable answers are dropped.
std::vector<LinkedAnswer> merge_and_link(const std::string& query_id, std::span<const SpanAnswer> answers,
                                         const AliasTable& aliases);

std::vector<LinkedAnswer> run_slot_filling(const SlotQuery& query, const PipelineResources& resources,
                                           const PipelineConfig& config);

/// One answer list per query, in query order; queries are sharded over
/// config.threads workers.
std::vector<std::vector<LinkedAnswer>> run_slot_filling_batch(std::span<const SlotQuery> queries,
                                                              const PipelineResources& resources,
                                                              const PipelineConfig& config);

/// {"query_id", "answers": [{"text", "entity_id", "score", "passage_id"}]}
void write_linked_answers(std::span<const SlotQuery> queries,
                          std::span<const std::vector<LinkedAnswer>> answers,
                          const std::filesystem::path& path);

/// query_id -> answer texts, from an end-to-end or reader predictions file.
std::map<std::string, std::vector<std::string>> read_answer_texts(const std::filesystem::path& path);

}  // namespace slotfill
