#include "slotfill/lexical_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "binary_io.hpp"
#include "slotfill/error.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

namespace {

constexpr std::string_view kMagic = "BIDX";
constexpr std::uint32_t kVersion = 1;

bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

}  // namespace

LexicalIndex LexicalIndex::build(std::span<const Passage> passages, Bm25Params params) {
  if (passages.empty()) throw DataError("cannot build a lexical index from zero passages");

  LexicalIndex index;
  index.params_ = params;
  std::map<std::string, std::vector<Posting>> postings;
  std::uint64_t total_length = 0;

  for (const auto& passage : passages) {
    const auto ordinal = static_cast<std::uint32_t>(index.passage_ids_.size());
    if (!index.ordinal_by_id_.try_emplace(passage.passage_id, ordinal).second) {
      throw DuplicateIdError(passage.passage_id);
    }
    index.passage_ids_.push_back(passage.passage_id);

    const auto words = tokenize_words(passage.text);
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& w : words) ++tf[w];
    for (const auto& [term, count] : tf) {
      postings[std::string(term)].push_back(Posting{ordinal, count});
    }
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(words.size()));
    total_length += words.size();
  }

  index.avg_doc_length_ =
      static_cast<double>(total_length) / static_cast<double>(index.passage_ids_.size());
  index.terms_.reserve(postings.size());
  index.postings_.reserve(postings.size());
  for (auto& [term, list] : postings) {
    index.term_ids_.emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
    index.terms_.push_back(term);
    index.postings_.push_back(std::move(list));
  }
  return index;
}

std::optional<std::uint32_t> LexicalIndex::ordinal_of(std::string_view passage_id) const {
  auto it = ordinal_by_id_.find(std::string(passage_id));
  if (it == ordinal_by_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const Posting> LexicalIndex::postings(std::string_view term) const {
  auto it = term_ids_.find(std::string(term));
  if (it == term_ids_.end()) return {};
  return postings_[it->second];
}

double LexicalIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(passage_ids_.size());
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double LexicalIndex::term_weight(double idf, std::uint32_t tf, std::uint32_t doc_length) const {
  const double f = static_cast<double>(tf);
  const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_length) / avg_doc_length_);
  return idf * f * (params_.k1 + 1.0) / (f + norm);
}

std::vector<std::string> LexicalIndex::distinct_terms(std::span<const std::string> query_terms) const {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& t : query_terms) {
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

double LexicalIndex::score(std::span<const std::string> query_terms, std::string_view passage_id) const {
  const auto ordinal = ordinal_of(passage_id);
  if (!ordinal) throw UnknownIdError(std::string(passage_id));

  double total = 0.0;
  for (const auto& term : distinct_terms(query_terms)) {
    const auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), *ordinal,
                               [](const Posting& p, std::uint32_t o) { return p.ordinal < o; });
    if (it == list.end() || it->ordinal != *ordinal) continue;
    total += term_weight(idf(list.size()), it->tf, doc_lengths_[*ordinal]);
  }
  return total;
}

ResultList LexicalIndex::search(std::string_view query, std::size_t k) const {
  const auto terms = tokenize_words(query);
  return search_terms(terms, k);
}

ResultList LexicalIndex::search_terms(std::span<const std::string> query_terms, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");

  std::vector<double> acc(passage_ids_.size(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& term : distinct_terms(query_terms)) {
    const auto list = postings(term);
    if (list.empty()) continue;
    const double term_idf = idf(list.size());
    for (const auto& p : list) {
      if (acc[p.ordinal] == 0.0) touched.push_back(p.ordinal);
      acc[p.ordinal] += term_weight(term_idf, p.tf, doc_lengths_[p.ordinal]);
    }
  }

  std::vector<std::uint32_t> candidates;
  candidates.reserve(touched.size());
  for (auto o : touched) {
    if (acc[o] > 0.0) candidates.push_back(o);
  }
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return ranks_before(acc[a], passage_ids_[a], acc[b], passage_ids_[b]);
  };
  const std::size_t n = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n),
                    candidates.end(), before);

  ResultList results;
  results.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    results.push_back(ScoredPassage{passage_ids_[candidates[i]], acc[candidates[i]], i + 1});
  }
  return results;
}

void LexicalIndex::save(const std::filesystem::path& path) const {
  std::vector<std::uint8_t> blob;
  std::vector<std::uint64_t> offsets;
  offsets.reserve(terms_.size());
  for (const auto& list : postings_) {
    offsets.push_back(blob.size());
    std::uint32_t previous = 0;
    for (const auto& p : list) {
      detail::put_varint(blob, p.ordinal - previous);
      detail::put_varint(blob, p.tf);
      previous = p.ordinal;
    }
  }

  detail::BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u64(passage_ids_.size());
  w.f64(avg_doc_length_);
  w.f64(params_.k1);
  w.f64(params_.b);
  for (std::size_t i = 0; i < passage_ids_.size(); ++i) {
    w.string(passage_ids_[i]);
    w.u32(doc_lengths_[i]);
  }
  w.u64(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    w.string(terms_[t]);
    w.u32(static_cast<std::uint32_t>(postings_[t].size()));
    w.u64(offsets[t]);
  }
  w.u64(blob.size());
  w.bytes(blob);
  w.finish();
}

LexicalIndex LexicalIndex::load(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  r.expect_version(kVersion);

  LexicalIndex index;
  const std::uint64_t passage_count = r.u64();
  index.avg_doc_length_ = r.f64();
  index.params_.k1 = r.f64();
  index.params_.b = r.f64();
  for (std::uint64_t i = 0; i < passage_count; ++i) {
    auto id = r.string();
    const auto length = r.u32();
    if (!index.ordinal_by_id_.try_emplace(id, static_cast<std::uint32_t>(i)).second) {
      throw FormatError(r.path() + ": duplicate passage id " + id);
    }
    index.passage_ids_.push_back(std::move(id));
    index.doc_lengths_.push_back(length);
  }

  const std::uint64_t term_count = r.u64();
  std::vector<std::uint32_t> dfs;
  std::vector<std::uint64_t> offsets;
  for (std::uint64_t t = 0; t < term_count; ++t) {
    auto term = r.string();
    if (!index.terms_.empty() && !(index.terms_.back() < term)) {
      throw FormatError(r.path() + ": term dictionary not sorted");
    }
    index.term_ids_.emplace(term, static_cast<std::uint32_t>(t));
    index.terms_.push_back(std::move(term));
    dfs.push_back(r.u32());
    offsets.push_back(r.u64());
  }
  const std::uint64_t blob_size = r.u64();
  const auto blob = r.bytes(blob_size);
  r.expect_end();

  index.postings_.resize(term_count);
  for (std::uint64_t t = 0; t < term_count; ++t) {
    std::size_t pos = offsets[t];
    auto& list = index.postings_[t];
    list.reserve(dfs[t]);
    std::uint64_t ordinal = 0;
    for (std::uint32_t i = 0; i < dfs[t]; ++i) {
      std::uint64_t delta = 0;
      std::uint64_t tf = 0;
      if (!detail::get_varint(blob, pos, delta) || !detail::get_varint(blob, pos, tf)) {
        throw TruncatedFileError(r.path());
      }
      ordinal += delta;
      if (ordinal >= passage_count || (i > 0 && delta == 0)) {
        throw FormatError(r.path() + ": corrupt postings for term " + index.terms_[t]);
      }
      list.push_back(Posting{static_cast<std::uint32_t>(ordinal), static_cast<std::uint32_t>(tf)});
    }
  }
  return index;
}

std::optional<std::string> mine_hard_negative(const LexicalIndex& index, const PassageStore& passages,
                                              const SlotQuery& query,
                                              const std::set<std::string>& gold_passage_ids,
                                              const std::set<std::string>& gold_answers,
                                              std::size_t pool_size) {
  if (pool_size == 0) return std::nullopt;
  for (const auto& hit : index.search(query.rendered, pool_size)) {
    if (gold_passage_ids.contains(hit.passage_id)) continue;
    const Passage* p = passages.find(hit.passage_id);
    if (p == nullptr) continue;
    const auto words = tokenize_words(p->text);
    const bool has_answer = std::any_of(gold_answers.begin(), gold_answers.end(),
                                        [&](const std::string& a) { return tokens_contain_answer(words, a); });
    if (!has_answer) return hit.passage_id;
  }
  return std::nullopt;
}

}  // namespace slotfill
