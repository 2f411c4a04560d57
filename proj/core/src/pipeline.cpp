#include "slotfill/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "slotfill/parallel.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

using nlohmann::json;

void AliasTable::add(std::string_view alias, std::string entity_id) {
  auto key = normalize_answer(alias);
  if (key.empty()) return;
  entries_[std::move(key)] = std::move(entity_id);
}

std::optional<std::string> AliasTable::find(std::string_view text) const {
  auto it = entries_.find(normalize_answer(text));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

AliasTable AliasTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  AliasTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 2 || f[1].empty()) throw ParseError(path.string(), line_no, "expected alias<TAB>entity_id");
    table.add(f[0], f[1]);
  }
  return table;
}

std::optional<std::string> link_answer(const SpanAnswer& span, const AliasTable& aliases) {
  return aliases.find(span.text);
}

RetrieverKind parse_retriever_kind(std::string_view name) {
  if (name == "lexical" || name == "bm25") return RetrieverKind::kLexical;
  if (name == "dense") return RetrieverKind::kDense;
  throw ConfigError("unknown retriever: " + std::string(name));
}

std::string_view retriever_kind_name(RetrieverKind kind) {
  return kind == RetrieverKind::kLexical ? "lexical" : "dense";
}

LexicalRetriever::LexicalRetriever(const LexicalIndex* index) : index_(index) {
  if (index_ == nullptr) throw MissingResourceError("lexical index");
}

ResultList LexicalRetriever::retrieve(const SlotQuery& query, std::size_t k) const {
  return index_->search(query.rendered, k);
}

DenseRetriever::DenseRetriever(const EncoderParams* encoder, const VectorIndex* index)
    : encoder_(encoder), index_(index) {
  if (encoder_ == nullptr) throw MissingResourceError("encoder params");
  if (index_ == nullptr) throw MissingResourceError("dense index");
  if (encoder_->d_out() != index_->dimension()) {
    throw ConfigError("encoder output size " + std::to_string(encoder_->d_out()) +
                      " does not match dense index dimension " + std::to_string(index_->dimension()));
  }
}

ResultList DenseRetriever::retrieve(const SlotQuery& query, std::size_t k) const {
  if (index_->empty()) return {};
  return index_->search(encoder_->encode_query(query.rendered), k);
}

TrainedReader::TrainedReader(const ReaderParams* params) : params_(params) {
  if (params_ == nullptr) throw MissingResourceError("reader params");
}

SpanScores TrainedReader::score(const SlotQuery& query, const Passage& passage) const {
  return score_spans(*params_, query.rendered, passage);
}

void ExternalSpanScores::add(std::string query_id, std::string passage_id, SpanScores scores) {
  scores_[{std::move(query_id), std::move(passage_id)}] = std::move(scores);
}

SpanScores ExternalSpanScores::score(const SlotQuery& query, const Passage& passage) const {
  auto it = scores_.find({query.query_id, passage.passage_id});
  if (it != scores_.end()) return it->second;
  const double floor = -std::numeric_limits<double>::infinity();
  return SpanScores{std::vector<double>(passage.tokens.size(), floor),
                    std::vector<double>(passage.tokens.size(), floor), 0.0};
}

ExternalSpanScores ExternalSpanScores::load(const std::filesystem::path& path, const PassageStore& passages) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  ExternalSpanScores out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
    }
    SpanScores s;
    std::string qid;
    std::string pid;
    try {
      qid = j.at("query_id").get<std::string>();
      pid = j.at("passage_id").get<std::string>();
      s.start_scores = j.at("start_scores").get<std::vector<double>>();
      s.end_scores = j.at("end_scores").get<std::vector<double>>();
      s.null_score = j.at("null_score").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, std::string("bad score record: ") + e.what());
    }
    const Passage& p = passages.at(pid);
    if (s.start_scores.size() != p.tokens.size() || s.end_scores.size() != p.tokens.size()) {
      throw DimensionError(p.tokens.size(), std::max(s.start_scores.size(), s.end_scores.size()));
    }
    out.add(std::move(qid), std::move(pid), std::move(s));
  }
  return out;
}

std::vector<SpanAnswer> merge_answers(std::span<const SpanAnswer> answers) {
  std::vector<std::pair<std::string, SpanAnswer>> merged;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& a : answers) {
    auto key = normalize_answer(a.text);
    if (key.empty()) continue;
    auto [it, inserted] = slot.try_emplace(key, merged.size());
    if (inserted) {
      merged.emplace_back(std::move(key), a);
    } else if (a.score > merged[it->second].second.score) {
      merged[it->second].second = a;
    }
  }
  std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
    if (a.second.score != b.second.score) return a.second.score > b.second.score;
    return a.first < b.first;
  });
  std::vector<SpanAnswer> out;
  out.reserve(merged.size());
  for (auto& [key, span] : merged) out.push_back(std::move(span));
  return out;
}

std::vector<LinkedAnswer> merge_and_link(const std::string& query_id, std::span<const SpanAnswer> answers,
                                         const AliasTable& aliases) {
  std::vector<LinkedAnswer> out;
  for (auto& span : merge_answers(answers)) {
    auto entity = link_answer(span, aliases);
    if (!entity) continue;
    out.push_back(LinkedAnswer{std::move(span), std::move(*entity), query_id});
  }
  return out;
}

namespace {

void check_resources(const PipelineResources& r) {
  if (r.passages == nullptr) throw MissingResourceError("passage store");
  if (r.retriever == nullptr) throw MissingResourceError("retriever");
  if (r.reader == nullptr) throw MissingResourceError("reader");
  if (r.aliases == nullptr) throw MissingResourceError("alias table");
}

std::vector<LinkedAnswer> run_one(const SlotQuery& query, const PipelineResources& r, const PipelineConfig& config) {
  std::vector<SpanAnswer> answers;
  for (const auto& hit : r.retriever->retrieve(query, config.k)) {
    const Passage& passage = r.passages->at(hit.passage_id);
    auto found = decode_answers(r.reader->score(query, passage), passage, config.decode);
    answers.insert(answers.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  }
  return merge_and_link(query.query_id, answers, *r.aliases);
}

}  // namespace

std::vector<LinkedAnswer> run_slot_filling(const SlotQuery& query, const PipelineResources& resources,
                                           const PipelineConfig& config) {
  check_resources(resources);
  return run_one(query, resources, config);
}

std::vector<std::vector<LinkedAnswer>> run_slot_filling_batch(std::span<const SlotQuery> queries,
                                                              const PipelineResources& resources,
                                                              const PipelineConfig& config) {
  check_resources(resources);
  std::vector<std::vector<LinkedAnswer>> out(queries.size());
  parallel_for(queries.size(), config.threads, [&](std::size_t i) { out[i] = run_one(queries[i], resources, config); });
  return out;
}

void write_linked_answers(std::span<const SlotQuery> queries, std::span<const std::vector<LinkedAnswer>> answers,
                          const std::filesystem::path& path) {
  if (queries.size() != answers.size()) throw DimensionError(queries.size(), answers.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    json list = json::array();
    for (const auto& a : answers[i]) {
      list.push_back({{"text", a.span.text},
                      {"entity_id", a.entity_id},
                      {"score", a.span.score},
                      {"passage_id", a.span.passage_id}});
    }
    out << json{{"query_id", queries[i].query_id}, {"answers", list}}.dump() << '\n';
  }
}

std::map<std::string, std::vector<std::string>> read_answer_texts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      auto& texts = out[j.at("query_id").get<std::string>()];
      for (const auto& a : j.at("answers")) texts.push_back(a.at("text").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, std::string("bad answers record: ") + e.what());
    }
  }
  return out;
}

}  // namespace slotfill
