// Microbenchmarks for the hot paths: BM25 and flat dense search,
// featurization, and reader span scoring plus decoding.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/random.hpp"
#include "slotfill/reader.hpp"

namespace {

using namespace slotfill;

std::string random_text(Rng& rng, std::size_t words, std::size_t vocab) {
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) text += ' ';
    text += "w" + std::to_string(rng.below(vocab));
  }
  return text;
}

std::vector<Passage> make_corpus(std::size_t n, std::size_t words) {
  Rng rng(1);
  std::vector<Passage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Document doc{"d" + std::to_string(i), "", random_text(rng, words, 5000)};
    out.push_back(chunk_document(doc, {words, false}).front());
  }
  return out;
}

void BM_Bm25Search(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)), 100);
  const auto index = LexicalIndex::build(corpus);
  Rng rng(2);
  std::vector<std::string> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(random_text(rng, 6, 5000));
  std::size_t q = 0;
  for (auto _ : state) benchmark::DoNotOptimize(index.search(queries[q++ % queries.size()], 100));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Bm25Search)->Arg(1000)->Arg(10000);

void BM_DenseSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kDim = 256;
  Rng rng(3);
  std::vector<std::string> ids;
  std::vector<DenseVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("p" + std::to_string(i) + ":0");
    DenseVector v(kDim);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    rows.push_back(std::move(v));
  }
  VectorIndex index(kDim);
  index.add(ids, rows);
  const DenseVector& query = rows[n / 2];
  for (auto _ : state) benchmark::DoNotOptimize(index.search(query, 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DenseSearch)->Arg(10000)->Arg(100000);

void BM_Featurize(benchmark::State& state) {
  Rng rng(4);
  const std::string text = random_text(rng, static_cast<std::size_t>(state.range(0)), 5000);
  for (auto _ : state) benchmark::DoNotOptimize(featurize(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Featurize)->Arg(16)->Arg(100);

void BM_EncodePassage(benchmark::State& state) {
  const auto params = EncoderParams::initialize(kDefaultEncoderInputDim, kDefaultEncoderOutputDim, 5);
  Rng rng(5);
  const std::string text = random_text(rng, 100, 5000);
  for (auto _ : state) benchmark::DoNotOptimize(params.encode_passage(text));
}
BENCHMARK(BM_EncodePassage);

void BM_ReaderScoreAndDecode(benchmark::State& state) {
  const auto params = ReaderParams::initialize(kDefaultReaderFeatureDim, 6, 0.1);
  const auto corpus = make_corpus(1, static_cast<std::size_t>(state.range(0)));
  const std::string query = "ritonavir [SEP] interacts with";
  const DecodeOptions options;
  for (auto _ : state) {
    const auto scores = score_spans(params, query, corpus.front());
    benchmark::DoNotOptimize(decode_answers(scores, corpus.front(), options));
  }
}
BENCHMARK(BM_ReaderScoreAndDecode)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
