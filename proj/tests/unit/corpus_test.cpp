#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/error.hpp"
#include "temp_dir.hpp"

namespace slotfill {
namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += stem + std::to_string(i);
  }
  return out;
}

std::vector<std::size_t> chunk_sizes(std::size_t tokens) {
  std::vector<std::size_t> sizes;
  for (const auto& p : chunk_document({"d", "", words(tokens)})) sizes.push_back(p.size());
  return sizes;
}

TEST(Tokenize, SplitsOnNonAlphanumericRunsAndLowercases) {
  EXPECT_EQ(tokenize_words("Amprenavir interacts-with rifabutin"),
            (std::vector<std::string>{"amprenavir", "interacts", "with", "rifabutin"}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Tokenize, AlphanumericRunStaysWhole) {
  EXPECT_EQ(tokenize_words("L765A"), std::vector<std::string>{"l765a"});
}

TEST(Tokenize, OffsetsPointIntoSource) {
  const std::string text = "  Foo,bar ";
  const auto tokens = tokenize(text);
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(text.substr(tokens[0].char_start, tokens[0].char_end - tokens[0].char_start), "Foo");
  EXPECT_EQ(text.substr(tokens[1].char_start, tokens[1].char_end - tokens[1].char_start), "bar");
}

TEST(Tokenize, Utf8BytesAreWordCharacters) {
  EXPECT_EQ(tokenize_words("na\xc3\xafve x"), (std::vector<std::string>{"na\xc3\xafve", "x"}));
}

TEST(Chunk, GreedySizes) {
  EXPECT_EQ(chunk_sizes(250), (std::vector<std::size_t>{100, 100, 50}));
  EXPECT_EQ(chunk_sizes(100), (std::vector<std::size_t>{100}));
  EXPECT_EQ(chunk_sizes(101), (std::vector<std::size_t>{100, 1}));
}

TEST(Chunk, IdsAndTextFollowTokens) {
  const auto ps = chunk_document({"doc7", "T", words(5)}, {.max_passage_tokens = 2});
  ASSERT_EQ(ps.size(), 3u);
  EXPECT_EQ(ps[0].passage_id, "doc7:0");
  EXPECT_EQ(ps[2].passage_id, "doc7:2");
  EXPECT_EQ(ps[1].text, "w2 w3");
  EXPECT_EQ(ps[1].doc_id, "doc7");
}

TEST(Chunk, TitleOnlyEntersText) {
  const auto ps = chunk_document({"d", "My Title", "alpha beta"}, {.max_passage_tokens = 100, .include_title = true});
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].size(), 2u);
  EXPECT_NE(ps[0].text.find("my title"), std::string::npos);
}

TEST(Chunk, NoTokensIsAnError) {
  EXPECT_THROW(chunk_document({"d", "", " ,;. "}), DataError);
}

TEST(PassageStore, RejectsDuplicatesAndUnknownIds) {
  PassageStore store;
  store.add(chunk_document({"a", "", "x y"})[0]);
  EXPECT_THROW(store.add(chunk_document({"a", "", "z"})[0]), DuplicateIdError);
  EXPECT_THROW(store.at("missing:0"), UnknownIdError);
  EXPECT_EQ(store.at("a:0").text, "x y");
}

TEST(Ingest, TsvStats) {
  testing::TempDir dir;
  const auto path = dir.write("c.tsv", "d1\t" + words(50) + "\n" + "d2\t" + words(50, "v") + "\tTitle\n");
  PassageStore store;
  const auto stats = ingest_corpus(path, CorpusFormat::kTsv, store);
  EXPECT_EQ(stats, (CorpusStats{2, 2, 100}));
  EXPECT_EQ(store.size(), 2u);
}

TEST(Ingest, JsonlStats) {
  testing::TempDir dir;
  const auto path = dir.write("c.jsonl", R"({"id":"a","title":"t","text":"one two three"})"
                                         "\n"
                                         R"({"id":"b","text":"four"})"
                                         "\n");
  PassageStore store;
  EXPECT_EQ(ingest_corpus(path, CorpusFormat::kJsonl, store), (CorpusStats{2, 2, 4}));
}

TEST(Ingest, EmptyFile) {
  testing::TempDir dir;
  PassageStore store;
  EXPECT_EQ(ingest_corpus(dir.write("e.tsv", ""), CorpusFormat::kTsv, store), (CorpusStats{0, 0, 0}));
}

TEST(Ingest, DuplicateDocIdNamesTheId) {
  testing::TempDir dir;
  const auto path = dir.write("c.tsv", "same\tone\nother\ttwo\nsame\tthree\n");
  PassageStore store;
  try {
    ingest_corpus(path, CorpusFormat::kTsv, store);
    FAIL() << "expected DuplicateIdError";
  } catch (const DuplicateIdError& e) {
    EXPECT_EQ(e.id(), "same");
  }
  EXPECT_TRUE(store.empty());
}

TEST(Ingest, MalformedLineCarriesLineNumber) {
  testing::TempDir dir;
  PassageStore store;
  try {
    ingest_corpus(dir.write("c.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{not json\n"), CorpusFormat::kJsonl, store);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    ingest_corpus(dir.write("c.tsv", "only-one-field\n"), CorpusFormat::kTsv, store);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(PassageTsv, Roundtrip) {
  testing::TempDir dir;
  PassageStore store;
  for (const auto& p : chunk_document({"doc", "Title", words(7)}, {.max_passage_tokens = 3})) store.add(p);
  write_passages_tsv(store, dir / "p.tsv");
  const auto back = read_passages_tsv(dir / "p.tsv");
  ASSERT_EQ(back.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(back.passages()[i].passage_id, store.passages()[i].passage_id);
    EXPECT_EQ(back.passages()[i].text, store.passages()[i].text);
    EXPECT_EQ(back.passages()[i].doc_id, "doc");
    // Offsets are re-derived from the text column, so compare surfaces.
    EXPECT_EQ(tokenize_words(back.passages()[i].text), tokenize_words(store.passages()[i].text));
    EXPECT_EQ(back.passages()[i].size(), store.passages()[i].size());
  }
}

}  // namespace
}  // namespace slotfill
