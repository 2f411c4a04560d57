#include "slotfill/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "slotfill/error.hpp"
#include "slotfill/random.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Reads non-blank lines, calling fn(line, line_no).
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fn(line, line_no);
  }
}

json parse_json_line(const std::string& line, const std::filesystem::path& path, std::size_t line_no) {
  try {
    auto j = json::parse(line);
    if (!j.is_object()) throw ParseError(path.string(), line_no, "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* name, const std::filesystem::path& path, std::size_t line_no) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(path.string(), line_no, std::string("missing or mistyped field '") + name + "'");
  }
}

std::string doc_of(const std::string& passage_id) {
  const auto colon = passage_id.rfind(':');
  return colon == std::string::npos ? passage_id : passage_id.substr(0, colon);
}

struct PositiveEvidence {
  std::string passage_id;
  std::string tail;
  std::size_t start = 0;
  std::size_t end = 0;
};

}  // namespace

std::vector<RelationRecord> read_relation_records(const std::filesystem::path& path) {
  std::vector<RelationRecord> records;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const auto f = split(line, '\t');
    if (f.size() != 5) {
      throw ParseError(path.string(), line_no,
                       "expected head<TAB>relation<TAB>tail<TAB>pos|neg<TAB>passage_id");
    }
    if (f[3] != "pos" && f[3] != "neg") throw ParseError(path.string(), line_no, "label must be pos or neg");
    if (f[0].empty() || f[1].empty() || f[2].empty() || f[4].empty()) {
      throw ParseError(path.string(), line_no, "empty field");
    }
    records.push_back(RelationRecord{f[0], f[1], f[2], f[3] == "pos", f[4]});
  });
  return records;
}

void write_relation_records(std::span<const RelationRecord> records, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& r : records) {
    out << r.head << '\t' << r.relation << '\t' << r.tail << '\t' << (r.positive ? "pos" : "neg") << '\t'
        << r.passage_id << '\n';
  }
}

RelationMap read_relation_map(const std::filesystem::path& path) {
  RelationMap map;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw ParseError(path.string(), line_no, "expected source_relation<TAB>merged_relation");
    }
    map[f[0]] = f[1];
  });
  return map;
}

std::string SkipReport::to_text() const {
  std::string out = "skipped_count=" + std::to_string(skipped) + "\n";
  for (const auto& [reason, count] : reasons) out += "reason." + reason + "=" + std::to_string(count) + "\n";
  return out;
}

Split SlotFillDataset::split_of(const std::string& query_id) const {
  for (const auto& [split, ids] : splits) {
    if (ids.contains(query_id)) return split;
  }
  throw UnknownIdError(query_id);
}

std::vector<SlotQuery> SlotFillDataset::queries_in(Split split) const {
  std::vector<SlotQuery> out;
  for (const auto& q : queries) {
    if (split_of(q.query_id) == split) out.push_back(q);
  }
  return out;
}

std::vector<TrainingInstance> SlotFillDataset::retriever_instances_in(Split split) const {
  std::vector<TrainingInstance> out;
  for (const auto& i : retriever_instances) {
    if (split_of(i.query.query_id) == split) out.push_back(i);
  }
  return out;
}

std::vector<ReaderExample> SlotFillDataset::reader_examples_in(Split split) const {
  std::vector<ReaderExample> out;
  for (const auto& e : reader_examples) {
    if (split_of(e.query_id) == split) out.push_back(e);
  }
  return out;
}

SlotFillDataset build_biosf(std::span<const RelationRecord> records, const PassageStore& passages,
                            const LexicalIndex* index, const DatasetConfig& config) {
  auto merged = [&](const RelationRecord& r) -> const std::string& {
    auto it = config.relation_map.find(r.relation);
    if (it == config.relation_map.end()) throw DataError("relation type without a merge-map entry: " + r.relation);
    return it->second;
  };

  SlotFillDataset ds;
  std::map<std::string, SlotQuery> queries;
  std::map<std::string, std::vector<PositiveEvidence>> evidence;
  std::map<std::string, std::vector<std::string>> null_by_query;
  std::map<std::string, std::vector<std::string>> null_by_doc;

  for (const auto& r : records) {
    const std::string& relation = merged(r);
    if (!r.positive) {
      if (passages.find(r.passage_id) == nullptr) {
        ds.skipped.add("negative_passage_missing");
        continue;
      }
      null_by_query[make_query_id(r.head, relation)].push_back(r.passage_id);
      null_by_doc[doc_of(r.passage_id)].push_back(r.passage_id);
      continue;
    }
    const Passage* p = passages.find(r.passage_id);
    if (p == nullptr) {
      ds.skipped.add("passage_missing");
      continue;
    }
    std::vector<std::string> words;
    words.reserve(p->tokens.size());
    for (const auto& t : p->tokens) words.push_back(t.surface);
    const auto needle = tokenize_words(r.tail);
    const auto at = find_token_sequence(words, needle);
    if (!at) {
      ds.skipped.add("tail_not_in_passage");
      continue;
    }
    SlotQuery q = triple_to_query(Triple{r.head, relation, r.tail, r.passage_id, std::nullopt});
    auto [it, inserted] = queries.try_emplace(q.query_id, q);
    if (!inserted) {
      it->second.gold_tails.insert(r.tail);
      it->second.gold_passage_ids.insert(r.passage_id);
    }
    evidence[q.query_id].push_back({r.passage_id, r.tail, *at, *at + needle.size() - 1});
  }

  for (auto& [id, q] : queries) {
    const auto& ev = evidence[id];

    // Reader examples: one per positive record.
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const Passage& p = passages.at(ev[i].passage_id);
      ReaderExample ex;
      ex.example_id = id + ":" + std::to_string(i);
      ex.query_id = id;
      ex.query = q.rendered;
      ex.passage = p;
      ex.span = std::make_pair(ev[i].start, ev[i].end);
      const auto words = tokenize_words(p.text);
      for (const auto& tail : q.gold_tails) {
        if (tokens_contain_answer(words, tail)) ex.answers.push_back(tail);
      }
      ds.reader_examples.push_back(std::move(ex));
    }

    // Null negatives, same query first, then same source document.
    auto usable = [&](const std::string& pid) {
      if (q.gold_passage_ids.contains(pid)) return false;
      const auto words = tokenize_words(passages.at(pid).text);
      return std::none_of(q.gold_tails.begin(), q.gold_tails.end(),
                          [&](const std::string& t) { return tokens_contain_answer(words, t); });
    };
    std::set<std::string> positives_seen;
    std::size_t cursor = 0;
    for (const auto& e : ev) {
      if (!positives_seen.insert(e.passage_id).second) continue;
      std::vector<std::string> pool;
      std::set<std::string> in_pool;
      auto extend = [&](const std::vector<std::string>& from) {
        for (const auto& pid : from) {
          if (in_pool.insert(pid).second && usable(pid)) pool.push_back(pid);
        }
      };
      if (auto it = null_by_query.find(id); it != null_by_query.end()) extend(it->second);
      if (auto it = null_by_doc.find(doc_of(e.passage_id)); it != null_by_doc.end()) extend(it->second);
      const Passage& positive = passages.at(e.passage_id);
      for (std::size_t n = 0; n < config.null_negatives_per_positive && n < pool.size(); ++n) {
        ds.retriever_instances.push_back({q, positive, passages.at(pool[(cursor + n) % pool.size()])});
      }
      ++cursor;
    }

    if (config.mine_hard_negatives && index != nullptr) {
      if (auto hard = mine_hard_negative(*index, passages, q, q.gold_passage_ids, q.gold_tails,
                                         config.hard_negative_pool)) {
        const Passage& positive = passages.at(*q.gold_passage_ids.begin());
        ds.retriever_instances.push_back({q, positive, passages.at(*hard)});
      }
    }
    ds.queries.push_back(q);
  }

  // Query-level splits from a seeded shuffle of the sorted ids.
  std::vector<std::string> ids;
  for (const auto& q : ds.queries) ids.push_back(q.query_id);
  Rng rng(config.seed);
  rng.shuffle(std::span(ids));
  const double total = config.ratios.train + config.ratios.dev + config.ratios.test;
  if (!(total > 0.0)) throw ConfigError("split ratios must sum to a positive value");
  const auto n = static_cast<double>(ids.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * config.ratios.train / total));
  const auto n_dev = std::min(ids.size() - std::min(ids.size(), n_train),
                              static_cast<std::size_t>(std::llround(n * config.ratios.dev / total)));
  ds.splits[Split::kTrain];
  ds.splits[Split::kDev];
  ds.splits[Split::kTest];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Split s = i < n_train ? Split::kTrain : (i < n_train + n_dev ? Split::kDev : Split::kTest);
    ds.splits[s].insert(ids[i]);
  }
  return ds;
}

void export_kilt(std::span<const SlotQuery> queries, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& q : queries) {
    json provenance = json::array();
    for (const auto& pid : q.gold_passage_ids) provenance.push_back({{"passage_id", pid}});
    json output = json::array();
    for (const auto& tail : q.gold_tails) output.push_back({{"answer", tail}, {"provenance", provenance}});
    out << json{{"id", q.query_id}, {"input", q.rendered}, {"output", output}}.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<SlotQuery> import_kilt(const std::filesystem::path& path) {
  std::vector<SlotQuery> queries;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json_line(line, path, line_no);
    SlotQuery q;
    q.query_id = field<std::string>(j, "id", path, line_no);
    q.rendered = field<std::string>(j, "input", path, line_no);
    const auto sep = q.rendered.find(kSeparator);
    if (sep == std::string::npos) throw ParseError(path.string(), line_no, "input lacks \" [SEP] \"");
    q.head = q.rendered.substr(0, sep);
    q.relation = q.rendered.substr(sep + kSeparator.size());
    if (j.contains("output")) {
      if (!j["output"].is_array()) throw ParseError(path.string(), line_no, "output must be an array");
      for (const auto& o : j["output"]) {
        if (!o.is_object() || !o.contains("answer") || !o["answer"].is_string()) {
          throw ParseError(path.string(), line_no, "output entry lacks a string answer");
        }
        q.gold_tails.insert(o["answer"].get<std::string>());
        if (o.contains("provenance")) {
          for (const auto& p : o["provenance"]) {
            if (!p.is_object() || !p.contains("passage_id") || !p["passage_id"].is_string()) {
              throw ParseError(path.string(), line_no, "provenance entry lacks passage_id");
            }
            q.gold_passage_ids.insert(p["passage_id"].get<std::string>());
          }
        }
      }
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

void write_retriever_instances(std::span<const TrainingInstance> instances, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& i : instances) {
    out << json{{"query_id", i.query.query_id},
                {"head", i.query.head},
                {"relation", i.query.relation},
                {"positive", i.positive.passage_id},
                {"negative", i.negative.passage_id}}
               .dump()
        << '\n';
  }
}

std::vector<TrainingInstance> read_retriever_instances(const std::filesystem::path& path,
                                                       const PassageStore& passages) {
  std::vector<TrainingInstance> out;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json_line(line, path, line_no);
    SlotQuery q = make_query(field<std::string>(j, "head", path, line_no),
                             field<std::string>(j, "relation", path, line_no));
    q.query_id = field<std::string>(j, "query_id", path, line_no);
    const auto pos = field<std::string>(j, "positive", path, line_no);
    const auto neg = field<std::string>(j, "negative", path, line_no);
    const Passage* p = passages.find(pos);
    const Passage* n = passages.find(neg);
    if (p == nullptr || n == nullptr) {
      throw ParseError(path.string(), line_no, "unknown passage " + (p == nullptr ? pos : neg));
    }
    q.gold_passage_ids.insert(pos);
    out.push_back({std::move(q), *p, *n});
  });
  return out;
}

void write_reader_examples(std::span<const ReaderExample> examples, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& e : examples) {
    json span = nullptr;
    if (e.span) span = json::array({e.span->first, e.span->second});
    out << json{{"example_id", e.example_id},
                {"query_id", e.query_id},
                {"query", e.query},
                {"passage_id", e.passage.passage_id},
                {"span", span},
                {"answers", e.answers}}
               .dump()
        << '\n';
  }
}

std::vector<ReaderExample> read_reader_examples(const std::filesystem::path& path, const PassageStore& passages) {
  std::vector<ReaderExample> out;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json_line(line, path, line_no);
    ReaderExample e;
    e.example_id = field<std::string>(j, "example_id", path, line_no);
    e.query = field<std::string>(j, "query", path, line_no);
    if (j.contains("query_id")) e.query_id = field<std::string>(j, "query_id", path, line_no);
    const auto pid = field<std::string>(j, "passage_id", path, line_no);
    const Passage* p = passages.find(pid);
    if (p == nullptr) throw ParseError(path.string(), line_no, "unknown passage " + pid);
    e.passage = *p;
    if (j.contains("span") && !j["span"].is_null()) {
      const auto s = field<std::vector<std::size_t>>(j, "span", path, line_no);
      if (s.size() != 2) throw ParseError(path.string(), line_no, "span must be [start, end]");
      e.span = std::make_pair(s[0], s[1]);
    }
    if (j.contains("answers")) e.answers = field<std::vector<std::string>>(j, "answers", path, line_no);
    out.push_back(std::move(e));
  });
  return out;
}

}  // namespace slotfill
