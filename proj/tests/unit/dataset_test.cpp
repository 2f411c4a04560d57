#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "slotfill/dataset.hpp"
#include "slotfill/error.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/query.hpp"
#include "slotfill/random.hpp"
#include "slotfill/text.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace slotfill {
namespace {

using testing::make_passage;

TEST(Query, RenderingMatchesPublishedExamples) {
  EXPECT_EQ(triple_to_query({"Amprenavir", "interacts with", "rifabutin", {}, {}}).rendered,
            "Amprenavir [SEP] interacts with");
  EXPECT_EQ(triple_to_query({"sildenafil", "regulator", "L765A", {}, {}}).rendered, "sildenafil [SEP] regulator");
}

TEST(Query, IdDependsOnlyOnNormalizedHeadAndRelation) {
  const auto a = triple_to_query({"Amprenavir", "interacts with", "rifabutin", {}, {}});
  const auto b = triple_to_query({"amprenavir ", "Interacts  with", "ritonavir", {}, {}});
  EXPECT_EQ(a.query_id, b.query_id);
  EXPECT_NE(a.query_id, triple_to_query({"Amprenavir", "regulator", "x", {}, {}}).query_id);
  EXPECT_EQ(a.gold_tails, std::set<std::string>{"rifabutin"});
}

TEST(Query, EmptyFieldIsAnError) {
  EXPECT_THROW(triple_to_query({"", "r", "t", {}, {}}), DataError);
  EXPECT_THROW(triple_to_query({"h", "", "t", {}, {}}), DataError);
  EXPECT_THROW(triple_to_query({"h", "r", "", {}, {}}), DataError);
}

TEST(Dedup, GroupsTailsByHeadAndRelation) {
  const std::vector<Triple> triples = {
      {"A", "r", "B", "p1:0", {}}, {"A", "r", "C", "p2:0", {}}, {"D", "r", "B", "p3:0", {}}};
  const auto qs = dedup_queries(triples);
  ASSERT_EQ(qs.size(), 2u);
  const auto a = std::find_if(qs.begin(), qs.end(), [](const SlotQuery& q) { return q.rendered == "A [SEP] r"; });
  ASSERT_NE(a, qs.end());
  EXPECT_EQ(a->gold_tails, (std::set<std::string>{"B", "C"}));
  EXPECT_EQ(a->gold_passage_ids, (std::set<std::string>{"p1:0", "p2:0"}));
  EXPECT_TRUE(std::is_sorted(qs.begin(), qs.end(),
                             [](const SlotQuery& x, const SlotQuery& y) { return x.query_id < y.query_id; }));
  EXPECT_TRUE(dedup_queries({}).empty());
}

class BuildBiosf : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const auto& p : {make_passage("doc1:0", "Amprenavir levels rise with Ritonavir co-dosing"),
                          make_passage("doc1:1", "Amprenavir showed no change with placebo"),
                          make_passage("doc2:0", "Amprenavir plasma levels and rifabutin"),
                          make_passage("doc3:0", "Unrelated text about kinases")}) {
      store_.add(p);
    }
    config_.relation_map = {{"DDI-effect", "interacts with"}, {"CPR:3", "regulator"}};
  }
  PassageStore store_;
  DatasetConfig config_;
};

TEST_F(BuildBiosf, ReaderSpanLocatesTail) {
  const std::vector<RelationRecord> records = {{"Amprenavir", "DDI-effect", "ritonavir", true, "doc1:0"}};
  const auto ds = build_biosf(records, store_, nullptr, config_);
  ASSERT_EQ(ds.reader_examples.size(), 1u);
  const auto& ex = ds.reader_examples[0];
  ASSERT_TRUE(ex.span.has_value());
  EXPECT_EQ(ex.span->first, 4u);
  EXPECT_EQ(ex.span->second, 4u);
  EXPECT_EQ(ex.query, "Amprenavir [SEP] interacts with");
  EXPECT_EQ(ex.answers, std::vector<std::string>{"ritonavir"});
}

TEST_F(BuildBiosf, NullRecordOnlyFeedsRetrieverNegatives) {
  const std::vector<RelationRecord> records = {{"Amprenavir", "DDI-effect", "ritonavir", true, "doc1:0"},
                                               {"Amprenavir", "DDI-effect", "placebo", false, "doc1:1"}};
  const auto ds = build_biosf(records, store_, nullptr, config_);
  EXPECT_EQ(ds.reader_examples.size(), 1u);
  ASSERT_EQ(ds.retriever_instances.size(), 1u);
  EXPECT_EQ(ds.retriever_instances[0].positive.passage_id, "doc1:0");
  EXPECT_EQ(ds.retriever_instances[0].negative.passage_id, "doc1:1");
}

TEST_F(BuildBiosf, SkipsAndErrors) {
  const std::vector<RelationRecord> records = {{"Amprenavir", "DDI-effect", "saquinavir", true, "doc1:0"},
                                               {"Amprenavir", "DDI-effect", "x", true, "missing:0"}};
  const auto ds = build_biosf(records, store_, nullptr, config_);
  EXPECT_TRUE(ds.queries.empty());
  EXPECT_EQ(ds.skipped.skipped, 2u);
  EXPECT_EQ(ds.skipped.reasons.at("tail_not_in_passage"), 1u);
  EXPECT_EQ(ds.skipped.reasons.at("passage_missing"), 1u);
  EXPECT_NE(ds.skipped.to_text().find("skipped_count=2"), std::string::npos);

  const std::vector<RelationRecord> unknown = {{"A", "no-such-type", "t", true, "doc1:0"}};
  EXPECT_THROW(build_biosf(unknown, store_, nullptr, config_), DataError);
}

TEST_F(BuildBiosf, HardNegativeContainsNoGoldTail) {
  const std::vector<RelationRecord> records = {{"Amprenavir", "DDI-effect", "ritonavir", true, "doc1:0"}};
  const auto index = LexicalIndex::build(store_.passages());
  const auto ds = build_biosf(records, store_, &index, config_);
  ASSERT_EQ(ds.retriever_instances.size(), 1u);
  const auto& inst = ds.retriever_instances[0];
  EXPECT_NE(inst.negative.passage_id, "doc1:0");
  EXPECT_FALSE(text_contains_answer(inst.negative.text, "ritonavir"));
}

// Larger random record streams: invariants over every output.
TEST(BuildBiosfProperties, InstancesSplitsAndDeterminism) {
  Rng rng(41);
  const auto vocab = testing::numbered_vocab(80, "v");
  const auto tails = testing::numbered_vocab(40, "tail");
  PassageStore store;
  std::vector<RelationRecord> records;
  for (int d = 0; d < 60; ++d) {
    for (int s = 0; s < 2; ++s) {
      std::string text;
      for (int i = 0; i < 12; ++i) text += vocab[rng.below(vocab.size())] + " ";
      const std::string tail = tails[rng.below(tails.size())];
      const std::string id = "d" + std::to_string(d) + ":" + std::to_string(s);
      const bool positive = s == 0;
      if (positive) text += tail;
      store.add(make_passage(id, text));
      records.push_back({"h" + std::to_string(rng.below(15)), rng.below(2) ? "A" : "B", tail, positive, id});
    }
  }
  DatasetConfig config;
  config.relation_map = {{"A", "alpha"}, {"B", "beta"}};
  config.seed = 5;
  const auto index = LexicalIndex::build(store.passages());
  const auto ds = build_biosf(records, store, &index, config);
  ASSERT_FALSE(ds.retriever_instances.empty());
  for (const auto& inst : ds.retriever_instances) {
    const bool pos_has = std::any_of(inst.query.gold_tails.begin(), inst.query.gold_tails.end(),
                                     [&](const std::string& t) { return text_contains_answer(inst.positive.text, t); });
    const bool neg_has = std::any_of(inst.query.gold_tails.begin(), inst.query.gold_tails.end(),
                                     [&](const std::string& t) { return text_contains_answer(inst.negative.text, t); });
    EXPECT_TRUE(pos_has);
    EXPECT_FALSE(neg_has);
    EXPECT_NE(inst.positive.passage_id, inst.negative.passage_id);
  }
  std::size_t total = 0;
  for (const auto& [split, ids] : ds.splits) total += ids.size();
  EXPECT_EQ(total, ds.queries.size());
  for (const auto& q : ds.queries) {
    std::size_t memberships = 0;
    for (const auto& [split, ids] : ds.splits) memberships += ids.contains(q.query_id);
    EXPECT_EQ(memberships, 1u);
  }
  EXPECT_EQ(ds.splits.at(Split::kTrain).size(),
            static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(ds.queries.size()))));

  const auto again = build_biosf(records, store, &index, config);
  EXPECT_EQ(again.queries, ds.queries);
  EXPECT_EQ(again.splits, ds.splits);
}

TEST(Kilt, TwoTailsGiveOneLineWithTwoOutputs) {
  testing::TempDir dir;
  SlotQuery q = make_query("Amprenavir", "interacts with");
  q.gold_tails = {"rifabutin", "ritonavir"};
  q.gold_passage_ids = {"p:0"};
  const std::vector<SlotQuery> qs = {q};
  export_kilt(qs, dir / "k.jsonl");
  const auto text = testing::read_file(dir / "k.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  const auto back = import_kilt(dir / "k.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].gold_tails.size(), 2u);
}

TEST(Kilt, RoundtripHundredQueries) {
  Rng rng(8);
  std::vector<Triple> triples;
  for (int i = 0; i < 300; ++i) {
    triples.push_back({"head" + std::to_string(rng.below(40)), "rel " + std::to_string(rng.below(3)),
                       "tail" + std::to_string(rng.below(500)), "p" + std::to_string(i) + ":0", {}});
  }
  auto qs = dedup_queries(triples);
  qs.resize(std::min<std::size_t>(qs.size(), 100));
  testing::TempDir dir;
  export_kilt(qs, dir / "k.jsonl");
  EXPECT_EQ(import_kilt(dir / "k.jsonl"), qs);
}

TEST(Kilt, MalformedLineReportsLineNumber) {
  testing::TempDir dir;
  const auto path = dir.write("k.jsonl", "{\"id\":\"a\",\"input\":\"x [SEP] y\",\"output\":[]}\n{broken\n");
  try {
    import_kilt(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(import_kilt(dir.write("n.jsonl", "{\"id\":\"a\",\"input\":\"no separator\"}\n")), ParseError);
}

TEST(DatasetFiles, RecordsAndExamplesRoundtrip) {
  testing::TempDir dir;
  const std::vector<RelationRecord> records = {{"A", "r", "t", true, "p:0"}, {"B", "s", "u", false, "q:1"}};
  write_relation_records(records, dir / "r.tsv");
  const auto back = read_relation_records(dir / "r.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].head, "B");
  EXPECT_FALSE(back[1].positive);

  PassageStore store;
  store.add(make_passage("p:0", "alpha t beta"));
  store.add(make_passage("q:1", "gamma"));
  ReaderExample ex;
  ex.example_id = "e1";
  ex.query_id = "qid";
  ex.query = "A [SEP] r";
  ex.passage = store.at("p:0");
  ex.span = std::make_pair(1, 1);
  ex.answers = {"t"};
  ReaderExample none = ex;
  none.example_id = "e2";
  none.passage = store.at("q:1");
  none.span.reset();
  none.answers.clear();
  const std::vector<ReaderExample> examples = {ex, none};
  write_reader_examples(examples, dir / "x.jsonl");
  const auto read = read_reader_examples(dir / "x.jsonl", store);
  ASSERT_EQ(read.size(), 2u);
  EXPECT_EQ(read[0].span, ex.span);
  EXPECT_FALSE(read[1].span.has_value());
  EXPECT_EQ(read[0].query_id, "qid");

  const std::vector<TrainingInstance> inst = {{triple_to_query({"A", "r", "t", "p:0", {}}), store.at("p:0"), store.at("q:1")}};
  write_retriever_instances(inst, dir / "i.jsonl");
  const auto ri = read_retriever_instances(dir / "i.jsonl", store);
  ASSERT_EQ(ri.size(), 1u);
  EXPECT_EQ(ri[0].negative.passage_id, "q:1");
  EXPECT_EQ(ri[0].query.rendered, "A [SEP] r");
}

}  // namespace
}  // namespace slotfill
