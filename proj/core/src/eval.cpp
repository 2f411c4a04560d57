#include "slotfill/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slotfill/error.hpp"
#include "slotfill/random.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

HitMode parse_hit_mode(std::string_view name) {
  if (name == "answer_containment") return HitMode::kAnswerContainment;
  if (name == "gold_passage_id") return HitMode::kGoldPassageId;
  throw ConfigError("unknown hit mode: " + std::string(name));
}

std::string_view hit_mode_name(HitMode mode) {
  return mode == HitMode::kAnswerContainment ? "answer_containment" : "gold_passage_id";
}

double HitsReport::at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return hits[i];
  }
  throw std::out_of_range("hits@" + std::to_string(k) + " was not computed");
}

PassageTextLookup lookup_in(const PassageStore& store) {
  return [&store](const std::string& id) -> const std::string* {
    const Passage* p = store.find(id);
    return p == nullptr ? nullptr : &p->text;
  };
}

HitsReport eval_hits_at_k(std::span<const ResultList> results, std::span<const SlotQuery> golds,
                          std::span<const std::size_t> ks, HitMode mode, const PassageTextLookup& passages) {
  if (results.size() != golds.size()) {
    throw std::invalid_argument("eval_hits_at_k: " + std::to_string(results.size()) + " result lists for " +
                                std::to_string(golds.size()) + " queries");
  }
  HitsReport report;
  report.mode = mode;
  report.ks.assign(ks.begin(), ks.end());
  std::vector<std::size_t> hit_counts(ks.size(), 0);

  for (std::size_t q = 0; q < golds.size(); ++q) {
    const auto& list = results[q];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].rank != i + 1) {
        throw std::invalid_argument("eval_hits_at_k: results for " + golds[q].query_id + " are not rank-sorted");
      }
    }
    QueryHitRecord record{golds[q].query_id, 0, false};
    if (mode == HitMode::kAnswerContainment && golds[q].gold_tails.empty()) {
      record.excluded = true;
      ++report.excluded;
      report.per_query.push_back(record);
      continue;
    }
    for (const auto& hit : list) {
      bool is_hit = false;
      if (mode == HitMode::kGoldPassageId) {
        is_hit = golds[q].gold_passage_ids.contains(hit.passage_id);
      } else if (const std::string* text = passages(hit.passage_id)) {
        const auto words = tokenize_words(*text);
        is_hit = std::any_of(golds[q].gold_tails.begin(), golds[q].gold_tails.end(),
                             [&](const std::string& tail) { return tokens_contain_answer(words, tail); });
      }
      if (is_hit) {
        record.first_hit_rank = hit.rank;
        break;
      }
    }
    ++report.evaluated;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (record.first_hit_rank != 0 && record.first_hit_rank <= ks[i]) ++hit_counts[i];
    }
    report.per_query.push_back(record);
  }
  report.hits.resize(ks.size(), 0.0);
  if (report.evaluated > 0) {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      report.hits[i] = static_cast<double>(hit_counts[i]) / static_cast<double>(report.evaluated);
    }
  }
  return report;
}

double exact_match(std::string_view prediction, std::span<const std::string> golds) {
  const std::string p = normalize_answer(prediction);
  if (p.empty()) return 0.0;
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1.0;
  }
  return 0.0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
  const auto pred = normalized_tokens(prediction);
  if (pred.empty()) return 0.0;
  double best = 0.0;
  for (const auto& g : golds) {
    const auto gold = normalized_tokens(g);
    if (gold.empty()) continue;
    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int common = 0;
    for (const auto& t : pred) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++common;
      }
    }
    if (common == 0) continue;
    const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

ReaderMetrics eval_reader(std::span<const std::string> predictions, std::span<const std::vector<std::string>> golds) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("eval_reader: predictions and golds differ in length");
  }
  ReaderMetrics m;
  m.examples = predictions.size();
  if (predictions.empty()) return m;
  double em = 0.0;
  double f1 = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    em += exact_match(predictions[i], golds[i]);
    f1 += token_f1(predictions[i], golds[i]);
  }
  m.exact_match = em / static_cast<double>(predictions.size());
  m.token_f1 = f1 / static_cast<double>(predictions.size());
  return m;
}

double eval_micro_recall(std::span<const std::set<std::string>> extracted,
                         std::span<const std::set<std::string>> golds) {
  if (extracted.size() != golds.size()) {
    throw std::invalid_argument("eval_micro_recall: extracted and golds differ in length");
  }
  std::size_t recovered = 0;
  std::size_t total = 0;
  for (std::size_t q = 0; q < golds.size(); ++q) {
    std::set<std::string> gold;
    for (const auto& g : golds[q]) {
      auto n = normalize_answer(g);
      if (!n.empty()) gold.insert(std::move(n));
    }
    std::set<std::string> got;
    for (const auto& e : extracted[q]) got.insert(normalize_answer(e));
    total += gold.size();
    for (const auto& g : gold) {
      if (got.contains(g)) ++recovered;
    }
  }
  if (total == 0) throw DataError("micro-recall is undefined with zero gold tails");
  return static_cast<double>(recovered) / static_cast<double>(total);
}

std::vector<Passage> build_subset_corpus(std::span<const Passage> passages,
                                         const std::set<std::string>& gold_passage_ids,
                                         std::size_t target_size, std::uint64_t seed) {
  if (target_size < gold_passage_ids.size()) {
    throw DataError("subset target " + std::to_string(target_size) + " is smaller than the gold set (" +
                    std::to_string(gold_passage_ids.size()) + ")");
  }
  std::vector<char> keep(passages.size(), 0);
  std::vector<std::size_t> others;
  std::size_t found = 0;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (gold_passage_ids.contains(passages[i].passage_id)) {
      keep[i] = 1;
      ++found;
    } else {
      others.push_back(i);
    }
  }
  if (found != gold_passage_ids.size()) throw DataError("gold passage missing from the full corpus");

  const std::size_t wanted = std::min(target_size - found, others.size());
  Rng rng(seed);
  // Partial Fisher-Yates: the first `wanted` slots become the sample.
  for (std::size_t i = 0; i < wanted; ++i) {
    std::swap(others[i], others[i + rng.below(others.size() - i)]);
    keep[others[i]] = 1;
  }
  std::vector<Passage> subset;
  subset.reserve(found + wanted);
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (keep[i]) subset.push_back(passages[i]);
  }
  return subset;
}

void EvalReport::add_hits(const HitsReport& hits, std::string_view prefix) {
  for (std::size_t i = 0; i < hits.ks.size(); ++i) {
    add(std::string(prefix) + "hits@" + std::to_string(hits.ks[i]), hits.hits[i]);
  }
  add(std::string(prefix) + "queries_evaluated", static_cast<double>(hits.evaluated));
  add(std::string(prefix) + "queries_excluded", static_cast<double>(hits.excluded));
  for (const auto& r : hits.per_query) {
    nlohmann::json j = {{"query_id", r.query_id},
                        {"hit_mode", hit_mode_name(hits.mode)},
                        {"first_hit_rank", r.first_hit_rank},
                        {"excluded", r.excluded}};
    per_query_json.push_back(j.dump());
  }
}

std::string EvalReport::to_table() const {
  std::size_t width = 6;
  for (const auto& m : metrics) width = std::max(width, m.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  os << std::string(width, '-') << "  " << std::string(10, '-') << '\n';
  for (const auto& m : metrics) {
    os << std::left << std::setw(static_cast<int>(width)) << m.name << "  " << std::fixed
       << std::setprecision(4) << m.value << '\n';
  }
  return os.str();
}

std::string EvalReport::to_jsonl() const {
  std::string out;
  for (const auto& m : metrics) {
    out += nlohmann::json{{"metric", m.name}, {"value", m.value}}.dump();
    out.push_back('\n');
  }
  for (const auto& line : per_query_json) {
    out += line;
    out.push_back('\n');
  }
  return out;
}

void write_retrieval_results(std::span<const SlotQuery> queries, std::span<const ResultList> results,
                             const std::filesystem::path& path) {
  if (queries.size() != results.size()) throw DimensionError(queries.size(), results.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : results[i]) {
      list.push_back({{"passage_id", r.passage_id}, {"score", r.score}, {"rank", r.rank}});
    }
    out << nlohmann::json{{"query_id", queries[i].query_id}, {"results", list}}.dump() << '\n';
  }
}

std::map<std::string, ResultList> read_retrieval_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, ResultList> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto& list = out[j.at("query_id").get<std::string>()];
      for (const auto& r : j.at("results")) {
        list.push_back({r.at("passage_id").get<std::string>(), r.at("score").get<double>(),
                        r.at("rank").get<std::size_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, std::string("bad retrieval record: ") + e.what());
    }
  }
  return out;
}

}  // namespace slotfill
