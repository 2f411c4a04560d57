#include "slotfill/corpus.hpp"

#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "slotfill/error.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

// Strips a trailing '\r' so CRLF files parse like LF files.
void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

Document parse_tsv_document(const std::string& line, const std::string& source, std::size_t line_no) {
  const auto fields = split(line, '\t');
  if (fields.size() < 2 || fields.size() > 3) {
    throw ParseError(source, line_no, "expected id<TAB>text[<TAB>title], got " +
                                          std::to_string(fields.size()) + " fields");
  }
  return Document{fields[0], fields.size() == 3 ? fields[2] : std::string(), fields[1]};
}

Document parse_jsonl_document(const std::string& line, const std::string& source, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
      !obj["id"].is_string() || !obj["text"].is_string()) {
    throw ParseError(source, line_no, "expected object with string fields id, text");
  }
  Document doc{obj["id"].get<std::string>(), "", obj["text"].get<std::string>()};
  if (obj.contains("title") && obj["title"].is_string()) doc.title = obj["title"].get<std::string>();
  return doc;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    std::string surface;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
      surface.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    tokens.push_back(Token{std::move(surface), start, i});
  }
  return tokens;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  for (auto& token : tokenize(text)) words.push_back(std::move(token.surface));
  return words;
}

std::string join_tokens(const std::vector<Token>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i].surface;
  }
  return out;
}

std::string join_tokens(const std::vector<Token>& tokens) {
  return join_tokens(tokens, 0, tokens.size());
}

std::vector<Passage> chunk_document(const Document& doc, const ChunkOptions& options) {
  if (options.max_passage_tokens == 0) throw std::invalid_argument("max_passage_tokens must be >= 1");
  auto tokens = tokenize(doc.text);
  if (tokens.empty()) throw DataError("document " + doc.doc_id + " has no tokens; cannot chunk");

  const std::string title_prefix =
      options.include_title ? join_tokens(tokenize(doc.title)) : std::string();

  std::vector<Passage> passages;
  const std::size_t step = options.max_passage_tokens;
  passages.reserve((tokens.size() + step - 1) / step);
  for (std::size_t begin = 0, ordinal = 0; begin < tokens.size(); begin += step, ++ordinal) {
    const std::size_t end = std::min(tokens.size(), begin + step);
    Passage p;
    p.passage_id = doc.doc_id + ":" + std::to_string(ordinal);
    p.doc_id = doc.doc_id;
    p.title = doc.title;
    p.tokens.assign(std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(begin)),
                    std::make_move_iterator(tokens.begin() + static_cast<std::ptrdiff_t>(end)));
    p.text = join_tokens(p.tokens);
    if (!title_prefix.empty()) p.text = title_prefix + " " + p.text;
    passages.push_back(std::move(p));
  }
  return passages;
}

void PassageStore::add(Passage passage) {
  auto [it, inserted] = by_id_.try_emplace(passage.passage_id, passages_.size());
  if (!inserted) throw DuplicateIdError(passage.passage_id);
  passages_.push_back(std::move(passage));
}

const Passage* PassageStore::find(std::string_view passage_id) const {
  auto it = by_id_.find(std::string(passage_id));
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

const Passage& PassageStore::at(std::string_view passage_id) const {
  const Passage* p = find(passage_id);
  if (p == nullptr) throw UnknownIdError(std::string(passage_id));
  return *p;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw ConfigError("unknown corpus format: " + std::string(name));
}

CorpusStats ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                          PassageStore& store, const ChunkOptions& options) {
  auto in = open_input(path);
  const std::string source = path.string();

  // Parse and chunk everything first so that a failure leaves `store` untouched.
  std::vector<Passage> pending;
  std::unordered_set<std::string> seen;
  CorpusStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (trim(line).empty()) continue;
    Document doc = format == CorpusFormat::kTsv ? parse_tsv_document(line, source, line_no)
                                                : parse_jsonl_document(line, source, line_no);
    if (doc.doc_id.empty()) throw ParseError(source, line_no, "empty document id");
    if (trim(doc.text).empty()) throw ParseError(source, line_no, "empty document text");
    if (!seen.insert(doc.doc_id).second || store.find(doc.doc_id + ":0") != nullptr) {
      throw DuplicateIdError(doc.doc_id);
    }
    std::vector<Passage> chunks;
    try {
      chunks = chunk_document(doc, options);
    } catch (const DataError& e) {
      throw ParseError(source, line_no, e.what());
    }
    ++stats.documents;
    for (auto& p : chunks) {
      stats.tokens += p.tokens.size();
      ++stats.passages;
      pending.push_back(std::move(p));
    }
  }
  for (auto& p : pending) store.add(std::move(p));
  return stats;
}

void write_passages_tsv(const PassageStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : store.passages()) {
    std::string title = p.title;
    for (char& c : title) {
      if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    out << p.passage_id << '\t' << p.text << '\t' << title << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

PassageStore read_passages_tsv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  PassageStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      throw ParseError(source, line_no, "expected passage_id<TAB>text[<TAB>title]");
    }
    Passage p;
    p.passage_id = fields[0];
    const auto colon = p.passage_id.rfind(':');
    p.doc_id = colon == std::string::npos ? p.passage_id : p.passage_id.substr(0, colon);
    p.title = fields.size() == 3 ? fields[2] : std::string();
    p.tokens = tokenize(fields[1]);
    if (p.tokens.empty()) throw ParseError(source, line_no, "passage has no tokens");
    p.text = fields[1];
    try {
      store.add(std::move(p));
    } catch (const DuplicateIdError&) {
      throw ParseError(source, line_no, "duplicate passage id " + fields[0]);
    }
  }
  return store;
}

}  // namespace slotfill
