#pragma once

/// \file reader.hpp
/// \brief Extractive reader: per-token start/end scores for a (query,
/// passage) pair, span decoding, and log-likelihood training.
///
/// Each passage token gets a set of binary hashed features conditioned on
/// the query (token identity, neighbours, query membership of the token and
/// its neighbours, query-token co-occurrences). Start and end scores are
/// linear in those features. A learned null logit competes in both softmax
/// distributions; the null span score is the sum of the two null logits.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotfill/corpus.hpp"
#include "slotfill/features.hpp"

namespace slotfill {

inline constexpr std::uint32_t kDefaultReaderFeatureDim = 1u << 18;

class ReaderParams {
 public:
  ReaderParams() = default;

  /// Start/end weights uniform in [-init_scale, init_scale] drawn from
  /// `seed`; null weight 0.
  static ReaderParams initialize(std::uint32_t d_feat, std::uint64_t seed, double init_scale = 0.0);

  std::uint32_t d_feat() const noexcept { return d_feat_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::vector<float>& start_weights() noexcept { return start_; }
  std::vector<float>& end_weights() noexcept { return end_; }
  const std::vector<float>& start_weights() const noexcept { return start_; }
  const std::vector<float>& end_weights() const noexcept { return end_; }
  float& null_weight() noexcept { return null_; }
  float null_weight() const noexcept { return null_; }

  /// "BRDR", u32 version, u32 d_feat, u64 seed, f32 null weight, then
  /// start and end weight vectors (little-endian f32).
  void save(const std::filesystem::path& path) const;
  static ReaderParams load(const std::filesystem::path& path);

  bool operator==(const ReaderParams&) const = default;

 private:
  std::uint32_t d_feat_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<float> start_;
  std::vector<float> end_;
  float null_ = 0.0f;
};

struct SpanScores {
  std::vector<double> start_scores;
  std::vector<double> end_scores;
  double null_score = 0.0;
};

/// Feature sets (unique, ascending, binary) for every passage token. The
/// query enters only as a set of tokens, so query token order is irrelevant.
std::vector<std::vector<std::uint32_t>> token_features(std::string_view query, const Passage& passage,
                                                       std::uint32_t d_feat);

SpanScores score_spans(const ReaderParams& params, std::string_view query, const Passage& passage);

struct DecodeOptions {
  std::size_t top_k = 3;
  std::size_t max_span_len = 10;
  double null_margin = 0.0;
};

struct SpanCandidate {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  double score = 0.0;

  bool operator==(const SpanCandidate&) const = default;
};

/// Spans (s, e) with s <= e < s + max_span_len and start[s] + end[e] >
/// null_score + null_margin, greedily kept in order of score (ties: earlier
/// start, then shorter span) while they do not overlap an already kept
/// span, up to top_k.
std::vector<SpanCandidate> decode_spans(const SpanScores& scores, const DecodeOptions& options);

struct SpanAnswer {
  std::string text;  // passage tokens joined by single spaces
  std::size_t token_start = 0;
  std::size_t token_end = 0;  // inclusive
  double score = 0.0;
  std::string passage_id;
};

std::vector<SpanAnswer> decode_answers(const SpanScores& scores, const Passage& passage,
                                       const DecodeOptions& options);

/// One supervised example. An absent span means the passage holds no
/// answer and the null position is the target.
struct ReaderExample {
  std::string example_id;
  std::string query_id;
  std::string query;  // rendered "head [SEP] relation"
  Passage passage;
  std::optional<std::pair<std::size_t, std::size_t>> span;  // inclusive token range
  std::vector<std::string> answers;                          // gold answer strings for EM/F1
};

/// -log softmax(start)[gold_start] - log softmax(end)[gold_end], where each
/// softmax runs over [null, token_0, ..., token_{n-1}].
double reader_loss(const ReaderParams& params, const ReaderExample& example);

struct ReaderGradient {
  double loss = 0.0;
  std::vector<std::pair<std::uint32_t, double>> start;  // ascending feature, summed
  std::vector<std::pair<std::uint32_t, double>> end;
  double null = 0.0;
};

ReaderGradient reader_loss_gradient(const ReaderParams& params, const ReaderExample& example);

/// Same harness as the encoder check: max relative error (1e-6 denominator
/// floor) between analytic and central-difference gradients over at least
/// `samples` coordinates.
double reader_grad_check(const ReaderParams& params, const ReaderExample& example, double epsilon,
                         std::size_t samples = 200, std::uint64_t seed = 0);

struct ReaderTrainConfig {
  std::uint32_t d_feat = kDefaultReaderFeatureDim;
  double learning_rate = 3e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double init_scale = 0.0;
  std::uint64_t seed = 0;
  DecodeOptions decode;  // used for dev exact match during selection
};

struct ReaderEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_exact_match = 0.0;
  double dev_f1 = 0.0;
  double dev_no_answer_accuracy = 0.0;
  double dev_overall = 0.0;
};

struct ReaderTrainReport {
  std::vector<ReaderEpoch> epochs;
  std::size_t best_epoch = 0;
  double best_dev_overall = 0.0;

  std::vector<std::pair<std::string, std::string>> manifest(const ReaderTrainConfig& config) const;
};

/// Top-ranked prediction per example ("" when nothing clears the null
/// threshold).
std::vector<std::string> predict_top_answers(const ReaderParams& params, std::span<const ReaderExample> examples,
                                             const DecodeOptions& options);

/// exact_match and f1 cover examples with a gold span; no_answer_accuracy
/// is the fraction of no-answer examples that decode to nothing; overall
/// counts both kinds of correct outcome over all examples.
struct ReaderDevScores {
  double exact_match = 0.0;
  double f1 = 0.0;
  double no_answer_accuracy = 0.0;
  double overall = 0.0;
  std::size_t answerable = 0;
  std::size_t unanswerable = 0;
};

ReaderDevScores evaluate_reader(const ReaderParams& params, std::span<const ReaderExample> examples,
                                const DecodeOptions& options);

/// -10 to 10 in steps of 0.25.
std::vector<double> default_null_margin_grid();

/// Picks from `candidates` the margin with the best overall dev accuracy
/// (ties: smallest margin).
double select_null_margin(const ReaderParams& params, std::span<const ReaderExample> dev,
                          const DecodeOptions& options, std::span<const double> candidates);

/// Minibatch Adam on the summed start/end log-likelihood. Keeps the epoch
/// (0 = initial) with the best overall dev accuracy; with an empty dev set the
/// last epoch wins. Throws DataError naming the example whose gold span lies
/// outside its passage.
ReaderParams train_reader(std::span<const ReaderExample> examples, std::span<const ReaderExample> dev,
                          const ReaderTrainConfig& config, ReaderTrainReport* report = nullptr);

}  // namespace slotfill
