#include "commands.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slotfill/config.hpp"
#include "slotfill/corpus.hpp"
#include "slotfill/dataset.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/error.hpp"
#include "slotfill/eval.hpp"
#include "slotfill/lexical_index.hpp"
#include "slotfill/parallel.hpp"
#include "slotfill/pipeline.hpp"
#include "slotfill/query.hpp"
#include "slotfill/reader.hpp"

namespace fs = std::filesystem;

namespace slotfill::cli {

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config, "key = value settings file; flags override it");
  sub->add_option("--seed", common.seed, "Seed for every random choice");
  sub->add_option("--threads", common.threads, "Worker threads (0 = all cores, 1 = fully deterministic)");
}

std::string joined(const std::vector<std::string>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ',';
    out += v;
  }
  return out;
}

// command=<name>, then config.<key>=<resolved value> for every option.
Manifest start_manifest(const CLI::App& sub) {
  Manifest m;
  m.add("command", sub.get_name());
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string& name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      value = opt->get_expected_min() == 0 ? "true" : joined(opt->results());
    } else if (opt->get_expected_min() == 0) {
      value = "false";
    } else {
      value = opt->get_default_str();
    }
    m.add("config." + name, value);
  }
  return m;
}

fs::path manifest_path(const fs::path& output) { return fs::path(output.string() + ".manifest"); }

void finish_manifest(Manifest& m, const fs::path& output) {
  m.add_timestamp();
  m.write(manifest_path(output));
}

DecodeOptions decode_options(std::size_t top_k, std::size_t max_span_len, double null_margin) {
  if (top_k == 0) throw std::invalid_argument("--top-k must be at least 1");
  if (max_span_len == 0) throw std::invalid_argument("--max-span-len must be at least 1");
  return DecodeOptions{top_k, max_span_len, null_margin};
}

void print_report(const EvalReport& report) { std::cout << report.to_table(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------- chunk

void add_chunk(CLI::App& app) {
  struct Opts {
    Common common;
    std::string corpus;
    std::string format = "tsv";
    std::size_t max_tokens = 100;
    bool include_title = false;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("chunk", "Split documents into fixed-size passages");
  add_common(sub, o->common);
  sub->add_option("--corpus", o->corpus, "Document file (TSV id/text/title or JSONL)")->required();
  sub->add_option("--format", o->format, "tsv or jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));
  sub->add_option("--max-passage-tokens", o->max_tokens, "Tokens per passage")->check(CLI::PositiveNumber);
  sub->add_flag("--include-title", o->include_title, "Prepend the title to the indexed passage text");
  sub->add_option("--out", o->out, "Passage TSV to write")->required();
  sub->callback([o, sub] {
    PassageStore store;
    const auto stats = ingest_corpus(o->corpus, parse_corpus_format(o->format), store,
                                     ChunkOptions{o->max_tokens, o->include_title});
    write_passages_tsv(store, o->out);
    auto m = start_manifest(*sub);
    m.add("documents", std::uint64_t{stats.documents});
    m.add("passages", std::uint64_t{stats.passages});
    m.add("tokens", std::uint64_t{stats.tokens});
    m.add_checksum("passages", o->out);
    finish_manifest(m, o->out);
    std::cout << "documents=" << stats.documents << " passages=" << stats.passages << " tokens=" << stats.tokens
              << '\n';
  });
}

// -------------------------------------------------------- index-lexical

void add_index_lexical(CLI::App& app) {
  struct Opts {
    Common common;
    std::string passages;
    double k1 = 0.9;
    double b = 0.4;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("index-lexical", "Build a BM25 index over a passage TSV");
  add_common(sub, o->common);
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--k1", o->k1, "BM25 term-frequency saturation");
  sub->add_option("--b", o->b, "BM25 length normalization");
  sub->add_option("--out", o->out, "Index file to write")->required();
  sub->callback([o, sub] {
    const PassageStore store = read_passages_tsv(o->passages);
    const auto index = LexicalIndex::build(store.passages(), Bm25Params{o->k1, o->b});
    index.save(o->out);
    auto m = start_manifest(*sub);
    m.add("passage_count", std::uint64_t{index.passage_count()});
    m.add("avg_doc_length", index.avg_doc_length());
    m.add("vocabulary_size", std::uint64_t{index.vocabulary_size()});
    m.add("file_bytes", std::uint64_t{fs::file_size(o->out)});
    m.add_checksum("index", o->out);
    finish_manifest(m, o->out);
    std::cout << "indexed " << index.passage_count() << " passages, " << index.vocabulary_size() << " terms\n";
  });
}

// ------------------------------------------------------ train-retriever

void add_train_retriever(CLI::App& app) {
  struct Opts {
    Common common;
    std::string passages;
    std::string train;
    std::string dev;
    std::string init;
    RetrieverTrainConfig config;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train-retriever", "Train the bi-encoder on (query, positive, negative) triples");
  add_common(sub, o->common);
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--train", o->train, "Retriever triples JSONL")->required();
  sub->add_option("--dev", o->dev, "Dev triples JSONL (model selection)");
  sub->add_option("--init", o->init, "Start from these encoder params instead of a seeded init");
  sub->add_option("--lr", o->config.learning_rate, "Learning rate");
  sub->add_option("--batch", o->config.batch_size, "Batch size")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", o->config.epochs, "Epochs");
  sub->add_option("--d-in", o->config.d_in, "Hashed feature buckets")->check(CLI::PositiveNumber);
  sub->add_option("--d-out", o->config.d_out, "Embedding size")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Encoder params file to write")->required();
  sub->callback([o, sub] {
    const PassageStore store = read_passages_tsv(o->passages);
    const auto train = read_retriever_instances(o->train, store);
    std::vector<TrainingInstance> dev;
    if (!o->dev.empty()) dev = read_retriever_instances(o->dev, store);
    auto config = o->config;
    config.seed = o->common.seed;
    RetrieverTrainReport report;
    EncoderParams params = o->init.empty()
                               ? train_retriever(train, dev, config, &report)
                               : train_retriever(EncoderParams::load(o->init), train, dev, config, &report);
    params.save(o->out);
    auto m = start_manifest(*sub);
    m.add_all(report.manifest(config));
    m.add_checksum("params", o->out);
    finish_manifest(m, o->out);
    std::cout << "best_epoch=" << report.best_epoch << " best_dev_loss=" << format_number(report.best_dev_loss)
              << '\n';
  });
}

// --------------------------------------------------------------- encode

void add_encode(CLI::App& app) {
  struct Opts {
    Common common;
    std::string params;
    std::string passages;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("encode", "Embed passages with the passage encoder");
  add_common(sub, o->common);
  sub->add_option("--params", o->params, "Encoder params file")->required();
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--out", o->out, "Vector file to write (ids go to <out>.ids)")->required();
  sub->callback([o, sub] {
    const auto params = EncoderParams::load(o->params);
    const PassageStore store = read_passages_tsv(o->passages);
    const auto& passages = store.passages();
    std::vector<DenseVector> vectors(passages.size());
    parallel_for(passages.size(), o->common.threads,
                 [&](std::size_t i) { vectors[i] = params.encode_passage(passages[i].text); });
    std::vector<std::string> ids;
    ids.reserve(passages.size());
    for (const auto& p : passages) ids.push_back(p.passage_id);
    VectorIndex index(params.d_out());
    index.add(ids, vectors);
    index.save(o->out);
    auto m = start_manifest(*sub);
    m.add("vectors", std::uint64_t{index.size()});
    m.add("dimension", std::uint64_t{index.dimension()});
    m.add_checksum("params", o->params);
    m.add_checksum("vectors", o->out);
    finish_manifest(m, o->out);
    std::cout << "encoded " << index.size() << " passages\n";
  });
}

// ---------------------------------------------------------- index-dense

void add_index_dense(CLI::App& app) {
  struct Opts {
    Common common;
    std::vector<std::string> vectors;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("index-dense", "Merge and validate vector files into one flat index");
  add_common(sub, o->common);
  sub->add_option("--vectors", o->vectors, "Vector files (DVEC with .ids sidecar), merged in order")
      ->required()
      ->delimiter(',');
  sub->add_option("--out", o->out, "Index file to write")->required();
  sub->callback([o, sub] {
    std::optional<VectorIndex> merged;
    for (const auto& path : o->vectors) {
      const VectorIndex part = VectorIndex::load(path);
      if (!merged) merged.emplace(part.dimension());
      std::vector<DenseVector> rows;
      rows.reserve(part.size());
      for (std::size_t i = 0; i < part.size(); ++i) rows.emplace_back(part.row(i).begin(), part.row(i).end());
      merged->add(part.ids(), rows);
    }
    merged->save(o->out);
    auto m = start_manifest(*sub);
    m.add("vectors", std::uint64_t{merged->size()});
    m.add("dimension", std::uint64_t{merged->dimension()});
    m.add("file_bytes", std::uint64_t{fs::file_size(o->out)});
    m.add_checksum("index", o->out);
    finish_manifest(m, o->out);
    std::cout << "indexed " << merged->size() << " vectors of dimension " << merged->dimension() << '\n';
  });
}

// ------------------------------------------------------------- retrieve

struct RetrieverOpts {
  std::string retriever = "lexical";
  std::string lexical_index;
  std::string dense_index;
  std::string params;
};

void add_retriever_options(CLI::App* sub, RetrieverOpts& r) {
  sub->add_option("--retriever", r.retriever, "lexical or dense")->check(CLI::IsMember({"lexical", "dense"}));
  sub->add_option("--lexical-index", r.lexical_index, "BM25 index file");
  sub->add_option("--dense-index", r.dense_index, "Dense index file");
  sub->add_option("--params", r.params, "Encoder params (dense retrieval)");
}

// Owns whatever the chosen retriever needs.
struct LoadedRetriever {
  std::optional<LexicalIndex> lexical;
  std::optional<VectorIndex> dense;
  std::optional<EncoderParams> encoder;
  std::unique_ptr<Retriever> retriever;

  void checksums(Manifest& m, const RetrieverOpts& r) const {
    if (lexical) m.add_checksum("lexical_index", r.lexical_index);
    if (dense) m.add_checksum("dense_index", r.dense_index);
    if (encoder) m.add_checksum("params", r.params);
  }
};

LoadedRetriever load_retriever(const RetrieverOpts& r) {
  LoadedRetriever out;
  if (parse_retriever_kind(r.retriever) == RetrieverKind::kLexical) {
    if (r.lexical_index.empty()) throw MissingResourceError("lexical index (--lexical-index)");
    out.lexical = LexicalIndex::load(r.lexical_index);
    out.retriever = std::make_unique<LexicalRetriever>(&*out.lexical);
  } else {
    if (r.dense_index.empty()) throw MissingResourceError("dense index (--dense-index)");
    if (r.params.empty()) throw MissingResourceError("encoder params (--params)");
    out.dense = VectorIndex::load(r.dense_index);
    out.encoder = EncoderParams::load(r.params);
    out.retriever = std::make_unique<DenseRetriever>(&*out.encoder, &*out.dense);
  }
  return out;
}

void add_retrieve(CLI::App& app) {
  struct Opts {
    Common common;
    RetrieverOpts retriever;
    std::string queries;
    std::size_t k = 100;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("retrieve", "Top-k passages for each query");
  add_common(sub, o->common);
  add_retriever_options(sub, o->retriever);
  sub->add_option("--queries", o->queries, "Queries (KILT-style JSONL)")->required();
  sub->add_option("--k", o->k, "Passages per query")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Results JSONL to write")->required();
  sub->callback([o, sub] {
    const auto queries = import_kilt(o->queries);
    const auto loaded = load_retriever(o->retriever);
    std::vector<ResultList> results(queries.size());
    parallel_for(queries.size(), o->common.threads,
                 [&](std::size_t i) { results[i] = loaded.retriever->retrieve(queries[i], o->k); });
    write_retrieval_results(queries, results, o->out);
    auto m = start_manifest(*sub);
    m.add("queries", std::uint64_t{queries.size()});
    loaded.checksums(m, o->retriever);
    finish_manifest(m, o->out);
    std::cout << "retrieved top-" << o->k << " for " << queries.size() << " queries\n";
  });
}

// --------------------------------------------------------- train-reader

void add_train_reader(CLI::App& app) {
  struct Opts {
    Common common;
    std::string passages;
    std::string train;
    std::string dev;
    ReaderTrainConfig config;
    bool tune_margin = false;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train-reader", "Train the extractive reader on span examples");
  add_common(sub, o->common);
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--train", o->train, "Reader examples JSONL")->required();
  sub->add_option("--dev", o->dev, "Dev examples JSONL (model selection)");
  sub->add_option("--lr", o->config.learning_rate, "Learning rate");
  sub->add_option("--batch", o->config.batch_size, "Batch size")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", o->config.epochs, "Epochs");
  sub->add_option("--d-feat", o->config.d_feat, "Hashed feature buckets")->check(CLI::PositiveNumber);
  sub->add_option("--init-scale", o->config.init_scale, "Uniform init half-width (0 = zeros)");
  sub->add_option("--top-k", o->config.decode.top_k, "Spans kept per passage when decoding");
  sub->add_option("--max-span-len", o->config.decode.max_span_len, "Longest span in tokens");
  sub->add_option("--null-margin", o->config.decode.null_margin, "Extra margin a span must beat the null score by");
  sub->add_flag("--tune-null-margin", o->tune_margin, "Pick the null margin with the best dev accuracy");
  sub->add_option("--out", o->out, "Reader params file to write")->required();
  sub->callback([o, sub] {
    const PassageStore store = read_passages_tsv(o->passages);
    const auto train = read_reader_examples(o->train, store);
    std::vector<ReaderExample> dev;
    if (!o->dev.empty()) dev = read_reader_examples(o->dev, store);
    auto config = o->config;
    config.seed = o->common.seed;
    config.decode = decode_options(config.decode.top_k, config.decode.max_span_len, config.decode.null_margin);
    ReaderTrainReport report;
    const ReaderParams params = train_reader(train, dev, config, &report);
    params.save(o->out);
    auto m = start_manifest(*sub);
    m.add_all(report.manifest(config));
    if (o->tune_margin && !dev.empty()) {
      const double margin = select_null_margin(params, dev, config.decode, default_null_margin_grid());
      m.add("selected_null_margin", margin);
      std::cout << "selected_null_margin=" << format_number(margin) << '\n';
    }
    m.add_checksum("params", o->out);
    finish_manifest(m, o->out);
    std::cout << "best_epoch=" << report.best_epoch << " best_dev_overall=" << format_number(report.best_dev_overall)
              << '\n';
  });
}

// ----------------------------------------------------------------- read

struct ReaderOpts {
  std::string reader;
  std::string external_scores;
  std::size_t top_k = 3;
  std::size_t max_span_len = 10;
  double null_margin = 0.0;
};

void add_reader_options(CLI::App* sub, ReaderOpts& r) {
  sub->add_option("--reader", r.reader, "Reader params file");
  sub->add_option("--external-scores", r.external_scores, "Precomputed span scores JSONL (instead of --reader)");
  sub->add_option("--top-k", r.top_k, "Spans kept per passage");
  sub->add_option("--max-span-len", r.max_span_len, "Longest span in tokens");
  sub->add_option("--null-margin", r.null_margin, "Extra margin a span must beat the null score by");
}

struct LoadedReader {
  std::optional<ReaderParams> params;
  bool external = false;
  std::unique_ptr<SpanScorer> scorer;
};

LoadedReader load_reader(const ReaderOpts& r, const PassageStore& passages) {
  LoadedReader out;
  if (!r.reader.empty()) {
    out.params = ReaderParams::load(r.reader);
    out.scorer = std::make_unique<TrainedReader>(&*out.params);
  } else if (!r.external_scores.empty()) {
    out.scorer = std::make_unique<ExternalSpanScores>(ExternalSpanScores::load(r.external_scores, passages));
    out.external = true;
  } else {
    throw MissingResourceError("reader (--reader or --external-scores)");
  }
  return out;
}

void add_read(CLI::App& app) {
  struct Opts {
    Common common;
    ReaderOpts reader;
    std::string queries;
    std::string passages;
    std::string retrieval;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("read", "Extract answer spans from retrieved passages");
  add_common(sub, o->common);
  add_reader_options(sub, o->reader);
  sub->add_option("--queries", o->queries, "Queries (KILT-style JSONL)")->required();
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--retrieval", o->retrieval, "Results JSONL from `retrieve`")->required();
  sub->add_option("--out", o->out, "Predictions JSONL to write")->required();
  sub->callback([o, sub] {
    const auto queries = import_kilt(o->queries);
    const PassageStore store = read_passages_tsv(o->passages);
    const auto retrieved = read_retrieval_results(o->retrieval);
    const auto loaded = load_reader(o->reader, store);
    const auto decode = decode_options(o->reader.top_k, o->reader.max_span_len, o->reader.null_margin);

    std::vector<std::vector<SpanAnswer>> predictions(queries.size());
    parallel_for(queries.size(), o->common.threads, [&](std::size_t i) {
      auto it = retrieved.find(queries[i].query_id);
      if (it == retrieved.end()) return;
      std::vector<SpanAnswer> found;
      for (const auto& hit : it->second) {
        const Passage& p = store.at(hit.passage_id);
        auto spans = decode_answers(loaded.scorer->score(queries[i], p), p, decode);
        found.insert(found.end(), spans.begin(), spans.end());
      }
      predictions[i] = merge_answers(found);
    });

    std::ofstream out(o->out, std::ios::binary);
    if (!out) throw DataError("cannot write " + o->out);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      nlohmann::json answers = nlohmann::json::array();
      for (const auto& a : predictions[i]) {
        answers.push_back({{"text", a.text}, {"score", a.score}, {"passage_id", a.passage_id}});
      }
      out << nlohmann::json{{"query_id", queries[i].query_id}, {"answers", answers}}.dump() << '\n';
    }
    out.close();
    auto m = start_manifest(*sub);
    if (loaded.params) m.add_checksum("reader", o->reader.reader);
    if (loaded.external) m.add_checksum("external_scores", o->reader.external_scores);
    finish_manifest(m, o->out);
    std::cout << "read " << queries.size() << " queries\n";
  });
}

// -------------------------------------------------------- build-dataset

void add_build_dataset(CLI::App& app) {
  struct Opts {
    Common common;
    std::string records;
    std::string relation_map;
    std::string passages;
    std::string lexical_index;
    std::size_t null_negatives = 1;
    std::size_t hard_negative_pool = 100;
    bool no_hard_negatives = false;
    double train_ratio = 0.8;
    double dev_ratio = 0.1;
    double test_ratio = 0.1;
    std::string out_dir;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("build-dataset", "Turn relation records into retriever and reader data");
  add_common(sub, o->common);
  sub->add_option("--records", o->records, "Record TSV: head, relation, tail, pos|neg, passage_id")->required();
  sub->add_option("--relation-map", o->relation_map, "TSV: source relation, merged relation")->required();
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--lexical-index", o->lexical_index, "BM25 index for hard negatives");
  sub->add_option("--null-negatives", o->null_negatives, "Null-relation negatives per positive");
  sub->add_option("--hard-negative-pool", o->hard_negative_pool, "BM25 results searched for a hard negative");
  sub->add_flag("--no-hard-negatives", o->no_hard_negatives, "Skip BM25 hard negatives");
  sub->add_option("--train-ratio", o->train_ratio, "Share of queries in train");
  sub->add_option("--dev-ratio", o->dev_ratio, "Share of queries in dev");
  sub->add_option("--test-ratio", o->test_ratio, "Share of queries in test");
  sub->add_option("--out-dir", o->out_dir, "Output directory")->required();
  sub->callback([o, sub] {
    const auto records = read_relation_records(o->records);
    const PassageStore store = read_passages_tsv(o->passages);
    std::optional<LexicalIndex> index;
    if (!o->lexical_index.empty() && !o->no_hard_negatives) index = LexicalIndex::load(o->lexical_index);

    DatasetConfig config;
    config.relation_map = read_relation_map(o->relation_map);
    config.null_negatives_per_positive = o->null_negatives;
    config.mine_hard_negatives = !o->no_hard_negatives;
    config.hard_negative_pool = o->hard_negative_pool;
    config.ratios = SplitRatios{o->train_ratio, o->dev_ratio, o->test_ratio};
    config.seed = o->common.seed;
    const auto ds = build_biosf(records, store, index ? &*index : nullptr, config);

    const fs::path dir = o->out_dir;
    fs::create_directories(dir);
    auto m = start_manifest(*sub);
    for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
      const std::string name(split_name(split));
      const auto queries = ds.queries_in(split);
      const auto retriever = ds.retriever_instances_in(split);
      const auto reader = ds.reader_examples_in(split);
      export_kilt(queries, dir / ("queries." + name + ".jsonl"));
      write_retriever_instances(retriever, dir / ("retriever." + name + ".jsonl"));
      write_reader_examples(reader, dir / ("reader." + name + ".jsonl"));
      m.add(name + ".queries", std::uint64_t{queries.size()});
      m.add(name + ".retriever_instances", std::uint64_t{retriever.size()});
      m.add(name + ".reader_examples", std::uint64_t{reader.size()});
    }
    write_text(dir / "skip_report.txt", ds.skipped.to_text());
    m.add("skipped_count", std::uint64_t{ds.skipped.skipped});
    if (index) m.add_checksum("lexical_index", o->lexical_index);
    m.add_timestamp();
    m.write(dir / "manifest.txt");
    std::cout << "queries=" << ds.queries.size() << " retriever_instances=" << ds.retriever_instances.size()
              << " reader_examples=" << ds.reader_examples.size() << " skipped=" << ds.skipped.skipped << '\n';
  });
}

// ------------------------------------------------------------------ e2e

std::vector<std::size_t> parse_ks(const std::vector<std::size_t>& ks) {
  if (ks.empty() || std::find(ks.begin(), ks.end(), 0) != ks.end()) {
    throw std::invalid_argument("--ks needs positive cutoffs");
  }
  auto out = ks;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t total_gold(const std::vector<SlotQuery>& queries) {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.gold_tails.size();
  return n;
}

void add_e2e(CLI::App& app) {
  struct Opts {
    Common common;
    RetrieverOpts retriever;
    ReaderOpts reader;
    std::string queries;
    std::string passages;
    std::string aliases;
    std::size_t k = 100;
    std::string hit_mode = "answer_containment";
    std::vector<std::size_t> ks = {1, 10, 100};
    std::string out;
    std::string report;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("e2e", "Retrieve, read and link; report metrics when golds are present");
  add_common(sub, o->common);
  add_retriever_options(sub, o->retriever);
  add_reader_options(sub, o->reader);
  sub->add_option("--queries", o->queries, "Queries (KILT-style JSONL)")->required();
  sub->add_option("--passages", o->passages, "Passage TSV")->required();
  sub->add_option("--aliases", o->aliases, "Alias TSV: alias, entity_id")->required();
  sub->add_option("--k", o->k, "Passages read per query")->check(CLI::PositiveNumber);
  sub->add_option("--hit-mode", o->hit_mode, "answer_containment or gold_passage_id")
      ->check(CLI::IsMember({"answer_containment", "gold_passage_id"}));
  sub->add_option("--ks", o->ks, "Retrieval cutoffs for hits@k")->delimiter(',');
  sub->add_option("--out", o->out, "Linked answers JSONL to write")->required();
  sub->add_option("--report", o->report, "Metrics JSONL to write");
  sub->callback([o, sub] {
    const auto ks = parse_ks(o->ks);
    const HitMode mode = parse_hit_mode(o->hit_mode);
    const auto decode = decode_options(o->reader.top_k, o->reader.max_span_len, o->reader.null_margin);
    const auto queries = import_kilt(o->queries);
    const PassageStore store = read_passages_tsv(o->passages);
    const AliasTable aliases = AliasTable::load(o->aliases);
    const auto retriever = load_retriever(o->retriever);
    const auto reader = load_reader(o->reader, store);

    PipelineConfig config{o->k, decode, o->common.threads};
    PipelineResources resources{&store, retriever.retriever.get(), reader.scorer.get(), &aliases};
    const auto answers = run_slot_filling_batch(queries, resources, config);
    write_linked_answers(queries, answers, o->out);

    EvalReport report;
    if (total_gold(queries) > 0) {
      std::vector<ResultList> results(queries.size());
      const std::size_t depth = std::max(ks.back(), o->k);
      parallel_for(queries.size(), o->common.threads,
                   [&](std::size_t i) { results[i] = retriever.retriever->retrieve(queries[i], depth); });
      report.add_hits(eval_hits_at_k(results, queries, ks, mode, lookup_in(store)), "retrieval.");

      std::vector<std::set<std::string>> extracted(queries.size());
      std::vector<std::set<std::string>> golds(queries.size());
      std::size_t gold_entities = 0;
      std::size_t found_entities = 0;
      for (std::size_t i = 0; i < queries.size(); ++i) {
        golds[i] = queries[i].gold_tails;
        std::set<std::string> entities;
        for (const auto& a : answers[i]) {
          extracted[i].insert(a.span.text);
          entities.insert(a.entity_id);
        }
        std::set<std::string> gold_ids;
        for (const auto& t : queries[i].gold_tails) {
          if (auto id = aliases.find(t)) gold_ids.insert(*id);
        }
        gold_entities += gold_ids.size();
        for (const auto& id : gold_ids) found_entities += entities.count(id);
      }
      report.add("micro_recall", eval_micro_recall(extracted, golds));
      if (gold_entities > 0) {
        report.add("linked_entity_recall", static_cast<double>(found_entities) / static_cast<double>(gold_entities));
      }
      print_report(report);
      if (!o->report.empty()) write_text(o->report, report.to_jsonl());
    }

    std::size_t answered = 0;
    for (const auto& a : answers) answered += a.empty() ? 0 : 1;
    auto m = start_manifest(*sub);
    m.add("queries", std::uint64_t{queries.size()});
    m.add("queries_with_answers", std::uint64_t{answered});
    for (const auto& metric : report.metrics) m.add("metric." + metric.name, metric.value);
    retriever.checksums(m, o->retriever);
    if (reader.params) m.add_checksum("reader", o->reader.reader);
    if (reader.external) m.add_checksum("external_scores", o->reader.external_scores);
    m.add_checksum("aliases", o->aliases);
    finish_manifest(m, o->out);
    std::cout << "answered " << answered << " of " << queries.size() << " queries\n";
  });
}

// ----------------------------------------------------------------- eval

void add_eval(CLI::App& app) {
  struct Opts {
    Common common;
    std::string queries;
    std::string passages;
    std::string retrieval;
    std::string answers;
    std::string hit_mode = "answer_containment";
    std::vector<std::size_t> ks = {1, 10, 100};
    std::string report;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("eval", "Score retrieval results and/or answers against gold queries");
  add_common(sub, o->common);
  sub->add_option("--queries", o->queries, "Gold queries (KILT-style JSONL)")->required();
  sub->add_option("--passages", o->passages, "Passage TSV (needed for answer containment)");
  sub->add_option("--retrieval", o->retrieval, "Results JSONL from `retrieve`");
  sub->add_option("--answers", o->answers, "Answers JSONL from `read` or `e2e`");
  sub->add_option("--hit-mode", o->hit_mode, "answer_containment or gold_passage_id")
      ->check(CLI::IsMember({"answer_containment", "gold_passage_id"}));
  sub->add_option("--ks", o->ks, "Retrieval cutoffs for hits@k")->delimiter(',');
  sub->add_option("--report", o->report, "Metrics JSONL to write");
  sub->callback([o, sub] {
    if (o->retrieval.empty() && o->answers.empty()) {
      throw ConfigError("eval needs --retrieval and/or --answers");
    }
    const auto queries = import_kilt(o->queries);
    EvalReport report;

    if (!o->retrieval.empty()) {
      const auto ks = parse_ks(o->ks);
      const HitMode mode = parse_hit_mode(o->hit_mode);
      std::optional<PassageStore> store;
      PassageTextLookup lookup = [](const std::string&) -> const std::string* { return nullptr; };
      if (mode == HitMode::kAnswerContainment) {
        if (o->passages.empty()) throw MissingResourceError("passages (--passages) for answer containment");
        store = read_passages_tsv(o->passages);
        lookup = lookup_in(*store);
      }
      const auto by_query = read_retrieval_results(o->retrieval);
      std::vector<ResultList> results(queries.size());
      for (std::size_t i = 0; i < queries.size(); ++i) {
        if (auto it = by_query.find(queries[i].query_id); it != by_query.end()) results[i] = it->second;
      }
      report.add_hits(eval_hits_at_k(results, queries, ks, mode, lookup), "retrieval.");
    }

    if (!o->answers.empty()) {
      const auto by_query = read_answer_texts(o->answers);
      std::vector<std::set<std::string>> extracted(queries.size());
      std::vector<std::set<std::string>> golds(queries.size());
      std::vector<std::string> top;
      std::vector<std::vector<std::string>> top_golds;
      for (std::size_t i = 0; i < queries.size(); ++i) {
        golds[i] = queries[i].gold_tails;
        auto it = by_query.find(queries[i].query_id);
        if (it != by_query.end()) extracted[i].insert(it->second.begin(), it->second.end());
        if (queries[i].gold_tails.empty()) continue;
        top.push_back(it != by_query.end() && !it->second.empty() ? it->second.front() : std::string());
        top_golds.emplace_back(queries[i].gold_tails.begin(), queries[i].gold_tails.end());
      }
      report.add("micro_recall", eval_micro_recall(extracted, golds));
      const auto reader = eval_reader(top, top_golds);
      report.add("top1_exact_match", reader.exact_match);
      report.add("top1_token_f1", reader.token_f1);
    }

    print_report(report);
    if (!o->report.empty()) {
      write_text(o->report, report.to_jsonl());
      auto m = start_manifest(*sub);
      if (!o->retrieval.empty()) m.add_checksum("retrieval", o->retrieval);
      if (!o->answers.empty()) m.add_checksum("answers", o->answers);
      finish_manifest(m, o->report);
    }
  });
}

}  // namespace

void register_commands(CLI::App& app) {
  add_chunk(app);
  add_index_lexical(app);
  add_train_retriever(app);
  add_encode(app);
  add_index_dense(app);
  add_retrieve(app);
  add_train_reader(app);
  add_read(app);
  add_build_dataset(app);
  add_e2e(app);
  add_eval(app);
}

}  // namespace slotfill::cli
