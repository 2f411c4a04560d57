#pragma once

/// \file lexical_index.hpp
/// \brief BM25 inverted index.
///
/// Scoring follows the Lucene/Anserini variant:
///
///   score(q, p) = sum over distinct t in q of
///                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))
///   idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
///
/// Query terms are visited in order of first occurrence in the query, so the
/// floating-point accumulation order is fixed.
///
/// Thread-safety: an index is immutable once built or loaded; concurrent
/// searches are safe.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/query.hpp"
#include "slotfill/scored_passage.hpp"

namespace slotfill {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

struct Posting {
  std::uint32_t ordinal = 0;
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

class LexicalIndex {
 public:
  /// Indexes tokenize(passage.text) for every passage, ordinals in input
  /// order. Throws DataError on an empty input or a repeated passage_id.
  static LexicalIndex build(std::span<const Passage> passages, Bm25Params params = {});

  double score(std::span<const std::string> query_terms, std::string_view passage_id) const;

  /// Top-k passages by BM25 over tokenize(query), ties by ascending
  /// passage_id. Passages scoring zero are never returned.
  ResultList search(std::string_view query, std::size_t k) const;
  ResultList search_terms(std::span<const std::string> query_terms, std::size_t k) const;

  void save(const std::filesystem::path& path) const;
  static LexicalIndex load(const std::filesystem::path& path);

  const Bm25Params& params() const noexcept { return params_; }
  void set_params(Bm25Params params) noexcept { params_ = params; }

  std::size_t passage_count() const noexcept { return passage_ids_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  std::size_t vocabulary_size() const noexcept { return terms_.size(); }
  std::uint32_t doc_length(std::size_t ordinal) const { return doc_lengths_.at(ordinal); }
  const std::string& passage_id(std::size_t ordinal) const { return passage_ids_.at(ordinal); }
  std::optional<std::uint32_t> ordinal_of(std::string_view passage_id) const;

  /// Postings for a term, sorted by ordinal; empty when the term is unseen.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }
  double idf(std::size_t df) const;

 private:
  double term_weight(double idf, std::uint32_t tf, std::uint32_t doc_length) const;
  std::vector<std::string> distinct_terms(std::span<const std::string> query_terms) const;

  Bm25Params params_;
  double avg_doc_length_ = 0.0;
  std::vector<std::string> passage_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  std::unordered_map<std::string, std::uint32_t> ordinal_by_id_;
  std::vector<std::string> terms_;  // sorted
  std::vector<std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
};

/// Highest-BM25 passage among the top `pool_size` results for the query's
/// rendered text that is neither a gold passage nor contains any gold
/// answer. std::nullopt when no pooled passage qualifies.
std::optional<std::string> mine_hard_negative(const LexicalIndex& index, const PassageStore& passages,
                                              const SlotQuery& query,
                                              const std::set<std::string>& gold_passage_ids,
                                              const std::set<std::string>& gold_answers,
                                              std::size_t pool_size = 100);

}  // namespace slotfill
