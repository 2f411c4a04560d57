#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "slotfill/error.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/query.hpp"
#include "slotfill/random.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

namespace slotfill {
namespace {

using testing::make_passage;

std::vector<std::string> ids_of(const ResultList& results) {
  std::vector<std::string> out;
  for (const auto& r : results) out.push_back(r.passage_id);
  return out;
}

TEST(LexicalIndex, AverageLength) {
  const std::vector<Passage> ps = {make_passage("a", "x y"), make_passage("b", "x y z w"),
                                   make_passage("c", "a b c d e f")};
  EXPECT_DOUBLE_EQ(LexicalIndex::build(ps).avg_doc_length(), 4.0);
}

TEST(LexicalIndex, TermFrequencyCounted) {
  const std::vector<Passage> ps = {make_passage("a", "ritonavir boosts ritonavir"), make_passage("b", "other")};
  const auto index = LexicalIndex::build(ps);
  const auto postings = index.postings("ritonavir");
  ASSERT_EQ(postings.size(), 1u);
  EXPECT_EQ(postings[0].tf, 2u);
  EXPECT_EQ(index.passage_id(postings[0].ordinal), "a");
}

TEST(LexicalIndex, DisjointPassagesNeverShareAPostingList) {
  const std::vector<Passage> ps = {make_passage("a", "alpha beta"), make_passage("b", "gamma delta")};
  const auto index = LexicalIndex::build(ps);
  for (const char* t : {"alpha", "beta", "gamma", "delta"}) EXPECT_EQ(index.postings(t).size(), 1u) << t;
}

TEST(LexicalIndex, BuildErrors) {
  EXPECT_THROW(LexicalIndex::build(std::vector<Passage>{}), DataError);
  const std::vector<Passage> dup = {make_passage("a", "x"), make_passage("a", "y")};
  EXPECT_THROW(LexicalIndex::build(dup), DuplicateIdError);
}

TEST(Bm25, NoOverlapScoresZero) {
  const std::vector<Passage> ps = {make_passage("a", "x y"), make_passage("b", "z")};
  const auto index = LexicalIndex::build(ps);
  const std::vector<std::string> q = {"z"};
  EXPECT_EQ(index.score(q, "a"), 0.0);
}

TEST(Bm25, SinglePassageHandValue) {
  const std::vector<Passage> ps = {make_passage("a", "ritonavir")};
  const auto index = LexicalIndex::build(ps);
  const std::vector<std::string> q = {"ritonavir"};
  // idf = ln(1 + 0.5 / 1.5) = ln(4/3); tf part = 1.9 / 1.9.
  EXPECT_NEAR(index.score(q, "a"), 0.287682, 1e-6);
  EXPECT_NEAR(index.score(q, "a"), std::log(4.0 / 3.0), 1e-12);
}

TEST(Bm25, DuplicateQueryTermCountsOnce) {
  Rng rng(5);
  const auto vocab = testing::numbered_vocab(30);
  const auto ps = testing::random_corpus(rng, 40, vocab, 20);
  const auto index = LexicalIndex::build(ps);
  const oracle::BruteForceBm25 brute(ps);
  const std::vector<std::string> once = {"w3", "w7"};
  const std::vector<std::string> twice = {"w3", "w7", "w3"};
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(index.score(twice, ps[i].passage_id), index.score(once, ps[i].passage_id));
    EXPECT_NEAR(index.score(twice, ps[i].passage_id), brute.score(twice, i), 1e-12);
  }
}

TEST(Bm25, UnknownPassage) {
  const std::vector<Passage> ps = {make_passage("a", "x")};
  const std::vector<std::string> q = {"x"};
  EXPECT_THROW(LexicalIndex::build(ps).score(q, "nope"), UnknownIdError);
}

TEST(SearchLexical, UniqueHit) {
  const std::vector<Passage> ps = {make_passage("a", "x y"), make_passage("b", "needle z"), make_passage("c", "y")};
  const auto r = LexicalIndex::build(ps).search("needle", 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].passage_id, "b");
  EXPECT_EQ(r[0].rank, 1u);
}

TEST(SearchLexical, TiesByAscendingId) {
  const std::vector<Passage> ps = {make_passage("z9", "apple"), make_passage("a1", "apple"), make_passage("m", "pear")};
  EXPECT_EQ(ids_of(LexicalIndex::build(ps).search("apple", 10)), (std::vector<std::string>{"a1", "z9"}));
}

TEST(SearchLexical, UnseenTermsGiveNothing) {
  const std::vector<Passage> ps = {make_passage("a", "x y")};
  EXPECT_TRUE(LexicalIndex::build(ps).search("qqq rrr", 10).empty());
}

TEST(SearchLexical, MatchesBruteForce) {
  Rng rng(17);
  const auto vocab = testing::numbered_vocab(60);
  const auto ps = testing::random_corpus(rng, 200, vocab, 30);
  const auto index = LexicalIndex::build(ps);
  const oracle::BruteForceBm25 brute(ps);
  for (int i = 0; i < 20; ++i) {
    const std::string q = vocab[rng.below(60)] + " " + vocab[rng.below(60)] + " " + vocab[rng.below(60)];
    EXPECT_EQ(index.search(q, 15), brute.search(q, 15)) << q;
  }
}

TEST(SearchLexical, ZeroK) {
  const std::vector<Passage> ps = {make_passage("a", "x")};
  EXPECT_THROW(LexicalIndex::build(ps).search("x", 0), std::invalid_argument);
}

class HardNegative : public ::testing::Test {
 protected:
  void SetUp() override {
    // "gold" ranks first for the query, "clean" second, "leaky" contains the answer.
    for (const auto& p : {make_passage("gold:0", "aspirin treats headache aspirin treats"),
                          make_passage("clean:0", "aspirin treats colds"),
                          make_passage("leaky:0", "aspirin headache"), make_passage("far:0", "unrelated words")}) {
      passages_.push_back(p);
      store_.add(p);
    }
  }
  std::vector<Passage> passages_;
  PassageStore store_;
};

TEST_F(HardNegative, SkipsGoldAndAnswerBearingPassages) {
  const auto index = LexicalIndex::build(passages_);
  const auto q = make_query("aspirin", "treats");
  ASSERT_EQ(index.search(q.rendered, 1)[0].passage_id, "gold:0");
  EXPECT_EQ(mine_hard_negative(index, store_, q, {"gold:0"}, {"headache"}), "clean:0");
}

TEST_F(HardNegative, ExhaustedPoolGivesNone) {
  const auto index = LexicalIndex::build(passages_);
  const auto q = make_query("aspirin", "treats");
  EXPECT_EQ(mine_hard_negative(index, store_, q, {"gold:0"}, {"aspirin"}), std::nullopt);
}

TEST_F(HardNegative, EmptyRetrievalGivesNone) {
  const auto index = LexicalIndex::build(passages_);
  EXPECT_EQ(mine_hard_negative(index, store_, make_query("zzz", "yyy"), {}, {}), std::nullopt);
}

TEST(LexicalIndexFile, RoundtripAndErrors) {
  Rng rng(3);
  const auto vocab = testing::numbered_vocab(40);
  const auto ps = testing::random_corpus(rng, 80, vocab, 25);
  const auto index = LexicalIndex::build(ps, {1.2, 0.75});
  testing::TempDir dir;
  const auto path = dir / "lex.bidx";
  index.save(path);
  const auto back = LexicalIndex::load(path);
  EXPECT_EQ(back.params().k1, 1.2);
  EXPECT_EQ(back.params().b, 0.75);
  for (int i = 0; i < 10; ++i) {
    const std::string q = vocab[rng.below(40)] + " " + vocab[rng.below(40)];
    EXPECT_EQ(back.search(q, 20), index.search(q, 20));
  }

  std::filesystem::copy_file(path, dir / "v.bidx");
  testing::set_format_version(dir / "v.bidx", 99);
  EXPECT_THROW(LexicalIndex::load(dir / "v.bidx"), VersionMismatchError);
  std::filesystem::copy_file(path, dir / "m.bidx");
  testing::overwrite_bytes(dir / "m.bidx", 0, "XXXX");
  EXPECT_THROW(LexicalIndex::load(dir / "m.bidx"), BadMagicError);
  std::filesystem::copy_file(path, dir / "t.bidx");
  testing::truncate_to_half(dir / "t.bidx");
  EXPECT_THROW(LexicalIndex::load(dir / "t.bidx"), TruncatedFileError);
}

}  // namespace
}  // namespace slotfill
