#pragma once

/// \file corpus.hpp
/// \brief Document ingestion, tokenization and fixed-size passage chunking.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slotfill {

struct Token {
  std::string surface;  // lowercased
  std::size_t char_start = 0;
  std::size_t char_end = 0;  // exclusive

  bool operator==(const Token&) const = default;
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
};

struct Passage {
  std::string passage_id;  // doc_id + ":" + ordinal
  std::string doc_id;
  std::string title;
  std::vector<Token> tokens;
  std::string text;  // token surfaces joined by single spaces

  std::size_t size() const noexcept { return tokens.size(); }
};

/// Lowercases ASCII and splits on every maximal run of characters that are
/// not ASCII alphanumerics. Bytes >= 0x80 count as word characters, so UTF-8
/// letters stay inside their token.
std::vector<Token> tokenize(std::string_view text);

/// Token surfaces only.
std::vector<std::string> tokenize_words(std::string_view text);

std::string join_tokens(const std::vector<Token>& tokens, std::size_t begin, std::size_t end);
std::string join_tokens(const std::vector<Token>& tokens);

struct ChunkOptions {
  std::size_t max_passage_tokens = 100;
  // When set, the title is prepended to Passage::text (the indexed text).
  // Passage::tokens never contain the title.
  bool include_title = false;
};

/// Greedy, non-overlapping chunks of exactly max_passage_tokens tokens with a
/// possibly shorter tail. Throws DataError when the document has no tokens.
std::vector<Passage> chunk_document(const Document& doc, const ChunkOptions& options = {});

/// Append-only passage collection keyed by passage_id.
class PassageStore {
 public:
  /// Throws DuplicateIdError when the id is already present.
  void add(Passage passage);

  const Passage* find(std::string_view passage_id) const;
  /// Throws UnknownIdError.
  const Passage& at(std::string_view passage_id) const;

  const std::vector<Passage>& passages() const noexcept { return passages_; }
  std::size_t size() const noexcept { return passages_.size(); }
  bool empty() const noexcept { return passages_.empty(); }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

enum class CorpusFormat { kTsv, kJsonl };

CorpusFormat parse_corpus_format(std::string_view name);

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t passages = 0;
  std::size_t tokens = 0;

  bool operator==(const CorpusStats&) const = default;
};

/// Streams documents from `path`, chunks each and appends the passages to
/// `store`. Malformed lines raise ParseError carrying the line number; a
/// repeated doc_id raises DuplicateIdError. On error the store is left
/// unchanged.
CorpusStats ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                          PassageStore& store, const ChunkOptions& options = {});

/// Passage TSV: passage_id<TAB>text<TAB>title, one per line, no header.
void write_passages_tsv(const PassageStore& store, const std::filesystem::path& path);

/// Reads a passage TSV. Tokens are re-derived from the text column and
/// doc_id is the passage_id up to its last ':'.
PassageStore read_passages_tsv(const std::filesystem::path& path);

}  // namespace slotfill
